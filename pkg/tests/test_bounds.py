import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from percbounds import bounds as B
from percbounds.lattice import FAMILIES, Kind, ModelSpec

# p^3 - 3p + 1 = 0 has the root 2 cos(4 pi / 9) in (0, 1)
CUBIC_ROOT = 2 * math.cos(4 * math.pi / 9)


def test_round_up_is_a_ceiling():
    assert B.round_up(0.68) == 0.68
    assert B.round_up(0.5) == 0.5
    assert B.round_up(2 / 3) == 0.6667
    assert B.round_up(0.19209923) == 0.1921
    assert B.round_up(0.123400001) == 0.1235


@given(st.floats(1e-6, 1 - 1e-6))
def test_round_up_never_below(x):
    r = B.round_up(x)
    assert r >= x and r - x < 1e-4 + 1e-15


def test_thm1_d3_is_the_cubic_root():
    r = B.theorem1_bound(3)
    assert r.value == pytest.approx(CUBIC_ROOT, abs=1e-12)
    assert float(np.polyval([1, 0, -3, 1], r.value)) == pytest.approx(0, abs=1e-12)


def test_thm1_d6_against_closed_form():
    # exponents (2, 2, 2): with s = (1-p)^2, (1-s)^3 = 2 - 3s, i.e. s^3 - 3s^2 + 1 = 0
    s = [x.real for x in np.roots([1, -3, 0, 1]) if abs(x.imag) < 1e-12 and 0 < x.real < 1][0]
    assert B.theorem1_bound(6).value == pytest.approx(1 - math.sqrt(s), abs=1e-12)


@pytest.mark.parametrize("d", range(3, 13))
def test_thm1_matches_independent_solver(d):
    n = B.theorem1_exponents(d)
    assert sum(n) == d

    def f(p):
        s = [(1 - p) ** k for k in n]
        return math.prod(1 - x for x in s) - (2 - sum(s))

    ref = brentq(f, 1e-9, 1 - 1e-9, xtol=1e-15)
    r = B.theorem1_bound(d)
    assert r.value == pytest.approx(ref, abs=1e-11)
    assert r.certificate.ok


def test_registry_constants():
    assert B.known_constant(ModelSpec(2, Kind.BOND, True)).value == pytest.approx(2 / 3)
    assert B.known_constant(ModelSpec(3, Kind.SITE)).value == 0.5
    with pytest.raises(B.BoundError):
        B.known_constant(ModelSpec(5, Kind.BOND))


def test_folding_closed_forms():
    site2 = B.known_constant(ModelSpec(2, Kind.SITE))
    assert B.folded_even_bound(4, site2).value == pytest.approx(1 - 0.32**0.5)
    assert B.folded_div3_site_bound(6).value == pytest.approx(1 - 0.5**0.5)
    assert B.folded_div3_site_bound(9).value == pytest.approx(1 - 0.5 ** (1 / 3))
    with pytest.raises(B.BoundError):
        B.folded_even_bound(5, site2)
    with pytest.raises(B.BoundError):
        B.folded_div3_site_bound(4)


def test_fold_general_identity_and_errors():
    base = B.theorem1_bound(3)
    assert B.fold_general(3, 3, base) is base
    with pytest.raises(B.BoundError):
        B.fold_general(6, 4, base)
    r = B.fold_general(6, 3, base)
    assert r.method is B.Method.FOLD
    assert 1 - (1 - r.value) ** 2 == pytest.approx(base.value)


def test_highdim_constant_d6():
    d = 6
    c = 1 + 8 / d + d**2.5 / (2 * math.pi) ** ((d - 1) / 2) * (d - 1) / (d - 3) * math.exp(1 / (12 * d))
    assert B.highdim_constant(d) == pytest.approx(c, rel=1e-14)
    assert B.oriented_bond_highdim_bound(6).value == pytest.approx(1 / 6 + c / 36)
    with pytest.raises(B.BoundError):
        B.oriented_bond_highdim_bound(3)


def test_crossover_alpha():
    assert B.crossover_alpha(ModelSpec(4, Kind.BOND, True)) == 5 / 4
    assert B.crossover_alpha(ModelSpec(4, Kind.SITE)) == 8 / 7
    with pytest.raises(B.BoundError):
        B.crossover_alpha(ModelSpec(4, Kind.BOND))


@settings(deadline=None, max_examples=60)
@given(st.floats(0.05, 0.95), st.sampled_from([3 / 2, 5 / 4, 8 / 7, 12 / 11]))
def test_crossover_root_solves_fixed_point(b, alpha):
    base = B.KnownConstant(ModelSpec(2, Kind.SITE, True), b, "test")
    r = B.crossover_bound(base, alpha)
    ref = brentq(lambda p: p - b * (p + (1 - p) ** alpha), 1e-12, 1 - 1e-12, xtol=1e-15)
    assert r.value == pytest.approx(ref, abs=1e-11)
    assert r.value < b


def test_bisection_errors():
    with pytest.raises(B.BoundError):
        B.solve_bracketed_root(B.RootProblem(lambda p: p + 1))
    with pytest.raises(B.BoundError):
        B.solve_bracketed_root(B.RootProblem(lambda p: p, bracket=(1.0, 0.0)))
    assert B.solve_bracketed_root(B.RootProblem(lambda p: p - 0.25)) == pytest.approx(0.25, abs=1e-12)


def test_certificate_counts_sign_changes():
    cert = B.certify_root(B.RootProblem(lambda p: (p - 0.2) * (p - 0.5) * (p - 0.8)))
    assert cert.sign_changes == 3 and not cert.ok


def test_provenance_chains():
    r = B.best_bound(ModelSpec.from_family("site", 7))
    assert [p.method for p in r.provenance] == [B.Method.REGISTRY, B.Method.THM3_2, B.Method.THM3_3]
    assert [p.d for p in r.provenance] == [3, 6, 7]
    r = B.best_bound(ModelSpec.from_family("oriented-bond", 5))
    assert [p.method for p in r.provenance] == [B.Method.REGISTRY, B.Method.THM2_1, B.Method.THM2_3]


def test_best_bound_rejects_low_dimension():
    with pytest.raises(B.BoundError):
        B.best_bound(ModelSpec(2))


@pytest.mark.parametrize("family", FAMILIES)
def test_bounds_decrease_with_dimension(family):
    values = [B.best_bound(ModelSpec.from_family(family, d)).value for d in range(3, 13)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_extended_rows_are_flagged():
    t = B.generate_table(9, 12)
    for (d, _), cell in t.cells.items():
        assert cell.extended == (d > 9)
        assert cell.to_dict().get("extended", False) == (d > 9)


def test_extension_takes_the_minimum():
    model = ModelSpec.from_family("oriented-bond", 10)
    values = [c.value for c in B._candidates(model)]
    assert B.best_bound(model).value == min(values)


def test_bound_by_method():
    r = B.bound_by_method(ModelSpec.from_family("oriented-bond", 2), "registry")
    assert r.rounded == 0.6667
    assert B.bound_by_method(ModelSpec.from_family("site", 6), "thm3.1").value == pytest.approx(1 - 0.32 ** (1 / 3))
    with pytest.raises(B.BoundError):
        B.bound_by_method(ModelSpec.from_family("bond", 4), "thm3.1")


def test_table_csv_format():
    csv = B.generate_table(3, 3).to_csv()
    assert csv == "d,bond,oriented_bond,site,oriented_site\n3,0.3473,0.5680,0.5000,0.6422\n"
    assert len(B.generate_table(3, 12).to_json()) == 10
    with pytest.raises(B.BoundError):
        B.generate_table(5, 4)


def test_bound_result_validates():
    with pytest.raises(B.BoundError):
        B.BoundResult(ModelSpec(3), 1.2, B.Method.THM1, (B.Provenance(B.Method.THM1, 3, 1.2),))
    with pytest.raises(B.BoundError):
        B.BoundResult(ModelSpec(3), 0.3, B.Method.THM1, ())
