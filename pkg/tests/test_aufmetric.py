import numpy as np

from sftops import aufmetric as auf
from sftops import sampling as smp
from sftops import sft

FULL = sft.TransitionMatrix.from_rows([[1, 1], [1, 1]])
P = sft.PeriodicOrbit((1,))
Q = sft.PeriodicOrbit((0,))
CP = auf.CoverIndexParams(2.0)
STEP = sft.build_point((0,), (), (1,), 0)


def elements(count=160, seed=3):
    rng = np.random.default_rng(seed)
    return smp.audit_elements(FULL, P, Q, rng, count)


class TestIndices:
    def test_ceil_log3(self):
        assert CP.ceil_log3 == 2
        assert auf.CoverIndexParams(3.0).ceil_log3 == 1
        assert auf.CoverIndexParams(1.5).ceil_log3 == 3

    def test_j_examples(self):
        assert auf.j_index(0, 0, CP) == 2
        assert auf.j_index(7, 3, CP) == 9

    def test_j_lower_bound(self):
        for n_a in range(0, 6):
            for n in range(0, 6):
                assert auf.j_index(n_a, n, CP) >= max(n_a, n) + 1

    def test_k_examples(self):
        assert auf.k_index(5, 1, CP) == 1
        assert auf.k_index(1, 3, CP) == 5  # 1 + 2 * ceil(log2 3)

    def test_k_step(self):
        for n_a1 in (1, 2, 5):
            for n in range(2, 8):
                assert auf.k_index(n_a1, n + 1, CP) - auf.k_index(n_a1, n, CP) == CP.ceil_log3

    def test_jk_induction(self):
        # j(a, k(a, n)) = k(a, n + 1)
        for n_a in (0, 1, 3, 7):
            n_a1 = max(n_a, 1)
            for n in range(1, 7):
                assert auf.j_index(n_a, auf.k_index(n_a1, n, CP), CP) == auf.k_index(
                    n_a1, n + 1, CP
                )


class TestCovers:
    def test_self_membership_all_levels(self):
        for a in elements(40)[::5]:
            for n in range(0, 7):
                assert auf.u_cover_member(a, a, n, CP)

    def test_nesting(self):
        els = elements(80)
        a = els[10]
        for c in els[::7]:
            prev = True
            for n in range(1, 8):
                cur = auf.u_cover_member(a, c, n, CP)
                assert prev or not cur  # membership at n+1 implies membership at n
                prev = cur

    def test_vcap_consistency(self):
        els = elements(60)
        vcap = auf.build_vcap_table(els, CP)
        for i, a in enumerate(els[::9]):
            for j, c in enumerate(els[::9]):
                lvl = auf.max_cover_level(a, c, CP)
                for n in (1, 2, 3):
                    assert auf.u_cover_member(a, c, n, CP) == (n <= lvl)


class TestQuasimetric:
    def test_diagonal_zero(self):
        els = elements(50)
        t = auf.build_quasimetric_table(els, CP)
        assert all(t.exponents[i, i] == -1 for i in range(t.size))
        assert t.values()[0, 0] == 0.0

    def test_rho_op_matches_table(self):
        els = elements(40)
        t = auf.build_quasimetric_table(els, CP, n_max=40)
        v = t.values()
        for i in range(0, len(els), 7):
            for j in range(0, len(els), 5):
                got = auf.quasimetric_rho(els[i], els[j], els, 40, CP)
                assert got == v[i, j]

    def test_rho_self_zero_and_cap(self):
        els = elements(20)
        assert auf.quasimetric_rho(els[3], els[3], els, 40, CP) == 0.0
        assert auf.quasimetric_rho(els[0], els[-1], [], 40, CP) <= 1.0

    def test_rho_candidate_monotone(self):
        els = elements(60)
        a, b = els[4], els[17]
        full = auf.quasimetric_rho(a, b, els, 40, CP)
        sub = auf.quasimetric_rho(a, b, els[:10], 40, CP)
        assert sub >= full

    def test_value_one_without_shared_cover(self):
        els = elements(50)
        t = auf.build_quasimetric_table(els, CP)
        v = t.values()
        assert (v[~np.eye(t.size, dtype=bool)] > 0).all()
        assert v.max() == 1.0

    def test_candidate_restriction_monotone(self):
        els = elements(80)
        t_full = auf.build_quasimetric_table(els, CP)
        sub = els[:40]
        t_sub = auf.build_quasimetric_table(sub, CP)
        assert (t_sub.values() >= t_full.values()[:40, :40] - 1e-15).all()


class TestChainMetric:
    def _table(self, exps):
        ids = [str(i) for i in range(len(exps))]
        return auf.QuasimetricTable(ids, np.array(exps))

    def test_three_point_no_shortcut(self):
        # rho(a,b) = rho(b,c) = 1/2, rho(a,c) = 1: the chain 1/2 + 1/2 ties
        t = self._table([[-1, 1, 0], [1, -1, 1], [0, 1, -1]])
        d = auf.chain_metric(t)
        assert d[0, 2] == 1.0

    def test_three_point_shortcut(self):
        # rho(a,b) = rho(b,c) = 1/4: chain beats the direct edge
        t = self._table([[-1, 2, 0], [2, -1, 2], [0, 2, -1]])
        d = auf.chain_metric(t)
        assert d[0, 2] == 0.5

    def test_exhaustive_three_point_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            e = rng.integers(0, 5, size=(3, 3))
            e = np.minimum(e, e.T)
            np.fill_diagonal(e, -1)
            t = self._table(e)
            d = auf.chain_metric(t)
            v = t.values()
            for i in range(3):
                for j in range(3):
                    paths = [v[i, j]]
                    for k in range(3):
                        paths.append(v[i, k] + v[k, j])
                    paths.append(v[i, 0] + v[0, 1] + v[1, 2])
                    assert d[i, j] <= min(paths) + 1e-15

    def test_symmetry_and_diagonal(self):
        els = elements(60)
        t = auf.build_quasimetric_table(els, CP)
        d = auf.chain_metric(t)
        assert np.allclose(d, d.T)
        assert np.allclose(np.diag(d), 0.0)


class TestSandwich:
    def test_cover_derived_table_clean(self):
        els = elements(140)
        t = auf.build_quasimetric_table(els, CP)
        rep = auf.sandwich_check(t, auf.chain_metric(t))
        assert rep.ok and rep.checked == t.size * (t.size - 1) // 2

    def test_single_point(self):
        t = auf.QuasimetricTable(["a"], np.array([[-1]]))
        rep = auf.sandwich_check(t, auf.chain_metric(t))
        assert rep.ok

    def test_adversarial_violation_flagged(self):
        # a hand-built table violating the star condition: one long edge
        # whose endpoints are joined by a much cheaper chain
        exps = np.array([[-1, 4, 0], [4, -1, 4], [0, 4, -1]])
        t = auf.QuasimetricTable(["a", "b", "c"], exps)
        rep = auf.sandwich_check(t, auf.chain_metric(t))
        assert not rep.ok and rep.lower_violations

    def test_chain_below_rho(self):
        els = elements(100)
        t = auf.build_quasimetric_table(els, CP)
        d = auf.chain_metric(t)
        assert (d <= t.values() + 1e-15).all()


class TestStar:
    def test_star_holds_with_witnesses(self):
        els = elements(200, seed=9)
        rng = np.random.default_rng(4)
        rep = auf.star_refinement_check(els, CP, rng, 200)
        assert rep.ok
        assert rep.witnesses >= 100


class TestDiameter:
    def test_regression_matches_predicted_base(self):
        els = elements(220, seed=11)
        cp = CP
        vcap = auf.build_vcap_table(els, cp)
        t = auf.build_quasimetric_table(els, cp, vcap=vcap)
        d = auf.chain_metric(t)
        anchors = [i for i, e in enumerate(els) if e.first == e.second][:20]
        fit = auf.diameter_bound_check(els, d, anchors, cp, range(0, 9), vcap=vcap)
        # lambda = 2 predicts base 2**-(1/2) ~ 0.7071
        assert fit.predicted_slope == -0.5
        assert fit.relative_error <= 0.10
        assert fit.gamma_prime > 0

    def test_gamma_prime_bounds_every_level(self):
        els = elements(160, seed=11)
        vcap = auf.build_vcap_table(els, CP)
        t = auf.build_quasimetric_table(els, CP, vcap=vcap)
        d = auf.chain_metric(t)
        anchors = [i for i, e in enumerate(els) if e.first == e.second][:12]
        fit = auf.diameter_bound_check(els, d, anchors, CP, range(0, 8), vcap=vcap)
        for k, y in zip(fit.ks, fit.log2_diameters):
            assert 2.0**y <= 2.0 ** (-k / CP.ceil_log3) * fit.gamma_prime + 1e-12
        # k = 0 reduces the bound to gamma' itself
        assert 2.0 ** fit.log2_diameters[0] <= fit.gamma_prime + 1e-12


class TestCsv:
    def test_roundtrip(self):
        els = elements(40)
        t = auf.build_quasimetric_table(els, CP)
        t2 = auf.table_from_csv(auf.table_to_csv(t))
        assert np.array_equal(t.exponents, t2.exponents)
        assert t.point_ids == t2.point_ids

    def test_entry_format(self):
        t = auf.QuasimetricTable(["x", "y"], np.array([[-1, 3], [3, -1]]))
        text = auf.table_to_csv(t)
        assert "2^-3" in text and "0" in text
