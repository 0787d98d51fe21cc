import numpy as np
import pytest

from hyperharmonic.boundary import Linear
from hyperharmonic.calculus import identity_map, vertical_scaling
from hyperharmonic.extension import QuadratureSpec
from hyperharmonic.flow import solve_restricted
from hyperharmonic.verify import SphereSampler, constants_ledger_build, main_chain_report

Q4 = QuadratureSpec(4)
NAMES = ["green", "average", "normalization", "main", "measure", "estimate", "endgame"]


@pytest.fixture(scope="module")
def closed_report():
    led = constants_ledger_build(K=2.0, q=1.0, T=1.0, D=1.0, r0=0.3)
    return main_chain_report(identity_map(), vertical_scaling(2.0), 0.5, led, SphereSampler(count=256), Q4,
                             n=32, estimate_sampler=SphereSampler(count=64), estimate_nodes=8)


def test_closed_form_pair_passes(closed_report):
    rep = closed_report
    assert [ln.name for ln in rep.lines] == NAMES
    assert rep.all_pass
    # d is the constant log 2, so the Green integral of its Laplacian vanishes
    assert rep.terms["green_residual"] < 1e-6
    assert rep.terms["sup_d"] == pytest.approx(np.log(2.0))
    assert rep.terms["sup_kind"] == "sample-sup"
    assert not rep.line("measure").applicable and not rep.line("endgame").applicable
    with pytest.raises(KeyError):
        rep.line("nope")


def test_report_serialisation(closed_report):
    text = closed_report.to_text()
    assert text.startswith("# main chain report\n")
    assert "[main]" in text and text.endswith("all_pass: true\n")
    assert "ledger.D_prime: 0.0" in text
    csv = closed_report.to_csv().splitlines()
    assert csv[0] == "line,lhs,rhs,margin,applicable,result"
    assert len(csv) == 1 + len(NAMES)


def test_flow_field_report():
    L = Linear(2.0, 0.0, 0.0, 1.0)
    field, rep = solve_restricted(L, 0.3, 17, 1e-4, quad=Q4)
    led = constants_ledger_build(K=2.0, q=1.0, T=1.0, D=1.0, r0=0.15)
    chain = main_chain_report(L, field, 0.19, led, SphereSampler(count=256), Q4, n=32,
                              estimate_sampler=SphereSampler(count=64), estimate_nodes=8)
    assert chain.all_pass
    assert chain.terms["sup_kind"] == "grid-sup"
    assert chain.terms["sup_d"] < 1e-4
    assert "grid" in chain.meta and chain.meta["map"] == L.to_text()
    with pytest.raises(ValueError, match="Laplacian range"):
        main_chain_report(L, field, 0.25, led)


def test_argument_checks():
    led = constants_ledger_build(K=2.0, q=1.0, T=1.0, D=1.0, r0=0.5)
    with pytest.raises(ValueError, match="r0"):
        main_chain_report(identity_map(), vertical_scaling(2.0), 0.3, led)
    with pytest.raises(ValueError):
        main_chain_report(identity_map(), vertical_scaling(2.0), 1.0, led)
