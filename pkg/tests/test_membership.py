from __future__ import annotations

from itertools import product

import numpy as np
import pytest

from causalchannels import (
    Assemblage,
    Correlation,
    almost_quantum_assemblage_membership,
    assemblage_from_commuting_projectors,
    build_moment_skeleton,
    chsh_value,
    correlations_from_channel,
    gram_realization,
    lhs_membership,
    lhv_membership,
    moment_matrix_from_realization,
    tsirelson_witness,
)
from causalchannels.constructions import PAULI_X, PAULI_Z
from causalchannels.linalg import max_entangled, partial_trace_dims, projector
from causalchannels.membership import (
    MomentMatrix,
    enumerate_strategies,
    moment_matrix_from_lhs_model,
    project_psd_cone,
    simplex_phase1,
    strategy_table,
    words_for_scenario,
    words_orthogonal,
)
from conftest import pr_table

RT2 = np.sqrt(2.0)


class TestSimplex:
    def test_direct_feasible_system(self):
        a = np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]])
        b = np.array([1.0, 1.0])
        ok, x, opt = simplex_phase1(a, b)
        assert ok
        assert np.max(np.abs(a @ x - b)) < 1e-9
        assert x.min() >= -1e-12

    def test_infeasible_system(self):
        # x1 + x2 = 1 and x1 + x2 = 2 cannot both hold
        a = np.array([[1.0, 1.0], [1.0, 1.0]])
        b = np.array([1.0, 2.0])
        ok, _, opt = simplex_phase1(a, b)
        assert not ok
        assert opt > 0.5


class TestLhv:
    def test_uniform_noise_is_local(self):
        rep = lhv_membership(Correlation(np.full((2, 2, 2, 2), 0.25)))
        assert rep.feasible
        assert rep.residual < 1e-9

    def test_certificate_reconstructs_table(self, rng):
        # random local point: mixture of deterministic strategies
        table = strategy_table(2, 2, 2)
        w = rng.dirichlet(np.ones(16))
        c = Correlation(np.tensordot(w, table, axes=(0, 0)))
        rep = lhv_membership(c)
        assert rep.feasible
        recon = np.tensordot(rep.certificate["weights"], table, axes=(0, 0))
        assert np.max(np.abs(recon - c.table)) < 1e-9

    def test_pr_infeasible(self):
        rep = lhv_membership(Correlation(pr_table()))
        assert rep.status == "numerically-infeasible"

    def test_singlet_infeasible(self, singlet_channel):
        c = correlations_from_channel(singlet_channel)
        assert chsh_value(c) > 2.0 + 1e-6  # certifying witness
        rep = lhv_membership(c)
        assert rep.status == "numerically-infeasible"

    def test_strategy_cap(self):
        uniform = Correlation(np.full((4,) * 3 + (4,) * 3, 1.0 / 64.0))
        with pytest.raises(ValueError, match="cap"):
            lhv_membership(uniform)  # (4^4)^3 joint strategies

    def test_strategy_count_invariant(self):
        assert len(enumerate_strategies(2, 2)) == 4
        assert len(enumerate_strategies(3, 2)) == 8
        assert strategy_table(2, 2, 2).shape[0] == 16


def zx_steering_assemblage() -> Assemblage:
    rho = projector(max_entangled(2))
    el = np.zeros((2, 2, 2, 2), dtype=complex)
    for x, obs in enumerate((PAULI_Z, PAULI_X)):
        _, vecs = np.linalg.eigh(obs)
        for a in range(2):
            proj = projector(vecs[:, 1 - a])
            el[a, x] = partial_trace_dims(np.kron(proj, np.eye(2)) @ rho, [2, 2], keep=[1])
    return Assemblage(el)


def steering_functional_value(a: Assemblage) -> tuple[float, float]:
    """CHSH-like steering functional and its exact LHS bound.

    Value: sum_{a,x} (-1)^a tr[sigma_{a|x} O_x] / sqrt(2); the bound comes
    from brute force over deterministic responses with the optimal hidden
    state (top eigenvalue of the signed observable sum).
    """
    obs = (PAULI_Z / RT2, PAULI_X / RT2)
    value = 0.0
    for x in range(2):
        for out in range(2):
            value += ((-1) ** out) * np.trace(a.element((out,), (x,)) @ obs[x]).real
    bound = -np.inf
    for resp in product(range(2), repeat=2):
        signed = sum(((-1) ** resp[x]) * obs[x] for x in range(2))
        bound = max(bound, float(np.linalg.eigvalsh(signed).max()))
    return value, bound


class TestLhs:
    def test_product_with_local_probabilities(self, rng):
        rho_b = np.array([[0.6, 0.2], [0.2, 0.4]], dtype=complex)
        el = np.zeros((2, 2, 2, 2, 2, 2), dtype=complex)
        el[...] = 0.25 * rho_b
        rep = lhs_membership(Assemblage(el))
        assert rep.feasible
        states = rep.certificate["states"]
        # certificate re-verifies
        table = strategy_table(2, 2, 2).reshape(16, -1)
        recon = sum(table[k][:, None, None] * states[k] for k in range(16))
        assert np.max(np.abs(recon.reshape(el.shape) - el)) < 1e-6

    def test_zx_steering_infeasible_with_witness(self):
        a = zx_steering_assemblage()
        value, bound = steering_functional_value(a)
        assert value > bound + 0.1  # analytic steering certificate
        rep = lhs_membership(a)
        assert rep.status == "numerically-infeasible"

    def test_pr_assemblage_infeasible(self):
        el = (pr_table()[..., None, None] * (np.eye(2) / 2)).astype(complex)
        rep = lhs_membership(Assemblage(el))
        assert rep.status == "numerically-infeasible"


class TestWordsAndSkeleton:
    def test_word_count_single_party(self):
        assert len(words_for_scenario(1, 1, 2)) == 3

    def test_word_count_two_party(self):
        assert len(words_for_scenario(2, 2, 2)) == 25

    @pytest.mark.parametrize(
        "n,m,d", [(1, 2, 2), (2, 2, 2), (1, 2, 3), (2, 1, 2)]
    )
    def test_word_count_formula(self, n, m, d):
        assert len(words_for_scenario(n, m, d)) == (1 + m * d) ** n

    def test_orthogonality_matches_bruteforce(self):
        words = words_for_scenario(2, 2, 2)

        def brute(u, v):
            for p1, a1, x1 in u:
                for p2, a2, x2 in v:
                    if p1 == p2 and x1 == x2 and a1 != a2:
                        return True
            return False

        count_fast = sum(
            words_orthogonal(u, v) for u in words for v in words
        )
        count_brute = sum(brute(u, v) for u in words for v in words)
        assert count_fast == count_brute
        assert count_fast > 0

    def test_skeleton_zero_classes_match_orthogonality(self):
        sk = build_moment_skeleton(2, 2, 2, 1)
        words = sk.words
        for i, u in enumerate(words):
            for j, v in enumerate(words):
                in_zero = sk.class_of[(i, j)] in sk.zero_classes
                if words_orthogonal(u, v):
                    assert in_zero

    def test_cap_enforced(self):
        with pytest.raises(ValueError, match="cap"):
            build_moment_skeleton(3, 3, 3, 4)

    @pytest.mark.parametrize("n,m,d", [(1, 2, 2), (2, 2, 2), (1, 2, 3), (2, 1, 2)])
    def test_identification_classes_match_bruteforce_closure(self, n, m, d):
        """The singleton-drop generators must reproduce the transitive
        closure of every common-prefix identification instance (nonempty
        dropped sub-word disjoint from both remainders)."""
        words = words_for_scenario(n, m, d)
        index = {w: k for k, w in enumerate(words)}
        parent: dict = {}

        def find(x):
            while parent.get(x, x) != x:
                parent[x] = parent.get(parent[x], parent[x])
                x = parent[x]
            return x

        def union(x, y):
            rx, ry = find(x), find(y)
            if rx != ry:
                parent[rx] = ry

        for t_word in words:
            if not t_word:
                continue
            t_parties = {p for p, _, _ in t_word}
            for s_word in words:
                if {p for p, _, _ in s_word} & t_parties:
                    continue
                for sp_word in words:
                    if {p for p, _, _ in sp_word} & t_parties:
                        continue
                    i = index[tuple(sorted(t_word + s_word))]
                    j = index[tuple(sorted(t_word + sp_word))]
                    union((i, j), (index[s_word], j))
                    union((i, j), (i, index[sp_word]))
        groups: dict = {}
        for i in range(len(words)):
            for j in range(len(words)):
                groups.setdefault(find((i, j)), set()).add((i, j))
        brute = {frozenset(g) for g in groups.values()}
        sk = build_moment_skeleton(n, m, d, 1, cap=10000)
        assert {frozenset(members) for members in sk.classes} == brute


def quantum_realization_n2():
    from test_constructions import tsirelson_realization

    r = tsirelson_realization()
    # lift to trusted_dim 2: same projectors, state on K (x) B with B = C^2
    state = np.kron(r.state, np.array([1.0, 0.0], dtype=complex))
    return type(r)(
        state=state,
        projectors=r.projectors,
        n_parties=2,
        n_inputs=2,
        n_outputs=2,
        kdim=4,
        trusted_dim=2,
    )


class TestAlmostQuantum:
    def test_lhs_certificate_gives_valid_moment_matrix(self):
        rho_b = np.array([[0.6, 0.2], [0.2, 0.4]], dtype=complex)
        el = np.zeros((2, 2, 2, 2, 2, 2), dtype=complex)
        el[...] = 0.25 * rho_b
        a = Assemblage(el)
        rep = lhs_membership(a)
        gamma = moment_matrix_from_lhs_model(a, rep.certificate["states"])
        res = gamma.condition_residuals()
        assert all(v < 1e-9 for v in res.values()), res
        rep2 = almost_quantum_assemblage_membership(a, init=gamma.matrix)
        assert rep2.feasible
        assert rep2.iterations <= 2

    def test_commuting_projector_forward_construction(self):
        r = quantum_realization_n2()
        gamma = moment_matrix_from_realization(r)
        res = gamma.condition_residuals()
        assert all(v < 1e-9 for v in res.values()), res
        a = assemblage_from_commuting_projectors(r)
        rep = almost_quantum_assemblage_membership(a, init=gamma.matrix)
        assert rep.feasible

    def test_pr_assemblage_not_almost_quantum(self):
        el = (pr_table()[..., None, None] * (np.eye(2) / 2)).astype(complex)
        a = Assemblage(el)
        rep = almost_quantum_assemblage_membership(a)
        assert rep.status == "numerically-infeasible"
        value, verdict = tsirelson_witness(a.to_correlation())
        assert verdict == "not-almost-quantum"  # corroborating witness

    def test_signalling_input_rejected(self):
        el = np.zeros((2, 2, 2, 2), dtype=complex)
        for a in range(2):
            for x in range(2):
                el[a, x] = 0.5 * projector(np.eye(2, dtype=complex)[x])
        with pytest.raises(ValueError, match="signalling"):
            almost_quantum_assemblage_membership(Assemblage(el))


class TestGramRealization:
    def test_quantum_round_trip(self):
        r = quantum_realization_n2()
        gamma = moment_matrix_from_realization(r)
        back = gram_realization(gamma)
        back.validate(1e-6)
        a1 = assemblage_from_commuting_projectors(r)
        a2 = assemblage_from_commuting_projectors(back)
        assert np.max(np.abs(a1.elements - a2.elements)) < 1e-6

    def test_lhs_round_trip_commutation(self):
        rho_b = np.array([[0.5, 0.0], [0.0, 0.5]], dtype=complex)
        el = np.zeros((2, 2, 2, 2, 2, 2), dtype=complex)
        el[...] = 0.25 * rho_b
        a = Assemblage(el)
        rep = lhs_membership(a)
        gamma = moment_matrix_from_lhs_model(a, rep.certificate["states"])
        back = gram_realization(gamma)
        back.validate(1e-6)  # includes the state-commutation invariant
        a2 = assemblage_from_commuting_projectors(back)
        assert np.max(np.abs(a2.elements - a.elements)) < 1e-6

    def test_rank_one_deterministic_matrix(self):
        # deterministic single-party assemblage (always outcome 0), modelled
        # with all weight on the single matching strategy: rank-1 matrix
        el = np.zeros((2, 2, 1, 1), dtype=complex)
        el[0, 0, 0, 0] = 1.0
        el[0, 1, 0, 0] = 1.0
        a = Assemblage(el)
        states = np.zeros((4, 1, 1), dtype=complex)
        strategies = enumerate_strategies(2, 2)
        states[strategies.index((0, 0))] = 1.0
        gamma = moment_matrix_from_lhs_model(a, states)
        assert all(v < 1e-9 for v in gamma.condition_residuals().values())
        back = gram_realization(gamma)
        assert back.kdim == 1

    def test_invalid_matrix_rejected(self):
        sk = build_moment_skeleton(1, 1, 2, 1)
        bad = MomentMatrix(sk, np.diag([1.0, -0.5, 0.2]).astype(complex))
        with pytest.raises(ValueError, match="violates"):
            gram_realization(bad)


class TestSolverSubstrate:
    def test_psd_projection_clamps(self):
        got = project_psd_cone(np.diag([1.0, -1.0]).astype(complex))
        assert np.max(np.abs(got - np.diag([1.0, 0.0]))) < 1e-12

    def test_psd_projection_complex(self, rng):
        g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        m = (g + g.conj().T) / 2
        p = project_psd_cone(m)
        assert np.linalg.eigvalsh(p).min() > -1e-12
        vals, vecs = np.linalg.eigh(m)
        direct = (vecs * np.clip(vals, 0, None)) @ vecs.conj().T
        assert np.max(np.abs(p - direct)) < 1e-10

    def test_feasible_init_converges_immediately(self):
        el = np.zeros((2, 2, 2, 2), dtype=complex)
        el[...] = np.eye(2) / 4
        a = Assemblage(el)
        rep = lhs_membership(a)
        assert rep.feasible
        assert rep.iterations <= 2

    def test_single_party_exhaustive_oracle(self, rng):
        """For one party the local polytope is the full distribution simplex
        and coincides with the almost-quantum set: a normalized table lies in
        both iff it is entrywise nonnegative.  Drive the two solvers on 100
        random normalized tables, half with negative entries, and compare
        against that oracle.  Feasible runs start from the product-coupling
        certificate (every feasible moment matrix is forced onto the PSD-cone
        boundary by the completeness identities, where a cold alternating
        start converges only sublinearly)."""
        strat = strategy_table(1, 2, 2)  # 4 single-party strategies
        flat = strat.reshape(4, -1).T
        strategies = enumerate_strategies(2, 2)
        for trial in range(100):
            raw = rng.uniform(0.1, 1.0, size=(2, 2))
            if trial % 2 == 1:
                raw[rng.integers(2), rng.integers(2)] = -rng.uniform(0.05, 0.3)
            table = raw / raw.sum(axis=0, keepdims=True)
            in_polytope = bool(table.min() >= -1e-12)

            a_mat = np.vstack([flat, np.ones((1, 4))])
            b_vec = np.concatenate([table.reshape(-1), [1.0]])
            lp_ok, _, _ = simplex_phase1(a_mat, b_vec)
            assert lp_ok == in_polytope

            assm = Assemblage(table[..., None, None].astype(complex))
            if in_polytope:
                states = np.zeros((4, 1, 1), dtype=complex)
                for lam, (a0, a1) in enumerate(strategies):
                    states[lam, 0, 0] = table[a0, 0] * table[a1, 1]
                cert = moment_matrix_from_lhs_model(assm, states)
                aq = almost_quantum_assemblage_membership(assm, init=cert.matrix)
            else:
                aq = almost_quantum_assemblage_membership(assm, max_iter=4000)
            assert aq.feasible == in_polytope


class TestTsirelsonWitness:
    def test_pr_not_almost_quantum(self):
        value, verdict = tsirelson_witness(Correlation(pr_table()))
        assert abs(value - 4.0) < 1e-9
        assert verdict == "not-almost-quantum"

    def test_alpha_correlations_not_almost_quantum(self, pq_alpha_channel):
        from causalchannels import assemblage_from_channel

        a = assemblage_from_channel(pq_alpha_channel)
        binary = a.to_correlation().coarse_grain(lambda k, o: o // 2, 2)
        value, verdict = tsirelson_witness(binary)
        assert abs(value - 3.0) < 1e-6
        assert verdict == "not-almost-quantum"

    def test_singlet_not_local_only(self, singlet_channel):
        c = correlations_from_channel(singlet_channel)
        _, verdict = tsirelson_witness(c)
        assert verdict == "not-local"

    def test_local_table_inconclusive(self):
        _, verdict = tsirelson_witness(Correlation(np.full((2, 2, 2, 2), 0.25)))
        assert verdict == "inconclusive"
