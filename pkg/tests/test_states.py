import pytest
from hypothesis import given
from hypothesis import strategies as st

from pilotsim.circuit import OPEN
from pilotsim.profiles import NOMINAL_J1772
from pilotsim.states import (
    ChargingState,
    MachineStatus,
    Perception,
    classify_state,
    detect_disparity,
    ev_initial,
    ev_load_for_state,
    ev_step,
    evse_initial,
    evse_step,
    replug,
)

S = ChargingState


@pytest.mark.parametrize("v,state", [(12.0, S.A), (10.61, S.A), (10.6, S.B), (8.79, S.B), (7.8, S.C),
                                     (5.62, S.C), (4.41, S.C), (4.4, S.F), (0.0, S.F)])
def test_classify_charger2(charger2, v, state):
    assert classify_state(v, charger2) is state


def test_classify_charger_without_f(charger1):
    assert classify_state(4.0, charger1) is S.C
    assert classify_state(0.2, charger1) is S.E


def test_classify_nominal_profile():
    assert classify_state(9.0, NOMINAL_J1772) is S.B
    assert classify_state(6.0, NOMINAL_J1772) is S.C
    assert classify_state(3.0, NOMINAL_J1772) is S.D
    assert classify_state(0.0, NOMINAL_J1772) is S.E
    assert classify_state(-12.0, NOMINAL_J1772) is S.F


@given(st.floats(min_value=-12, max_value=12), st.floats(min_value=-12, max_value=12))
def test_classification_monotone(charger2, v1, v2):
    lo, hi = sorted((v1, v2))
    assert classify_state(hi, charger2).rank >= classify_state(lo, charger2).rank


def test_loads(ev):
    assert ev_load_for_state(S.B, ev) == 2740
    assert ev_load_for_state(S.C, ev) == 882
    assert ev_load_for_state(S.A, ev) == OPEN


def test_evse_contactor_only_in_c(charger2):
    st_ = evse_initial()
    b = evse_step(st_, 8.79, charger2, 0.01)
    assert b.pwm_active and not b.contactor_closed
    c = evse_step(b, 5.62, charger2, 0.01)
    assert c.contactor_closed
    assert c.duty == pytest.approx(charger2.advertised_duty)
    a = evse_step(c, 12.0, charger2, 0.01)
    assert not a.pwm_active and not a.contactor_closed


@given(st.lists(st.floats(min_value=-12, max_value=12), min_size=1, max_size=30))
def test_evse_contactor_property(charger1, levels):
    s = evse_initial()
    for v in levels:
        s = evse_step(s, v, charger1, 0.01)
        assert s.contactor_closed == (s.state is S.C)


def test_evse_latches_on_f_when_configured(charger2):
    s = evse_step(evse_initial(), 2.0, charger2, 0.01)
    assert s.latched_error and s.state is S.F
    assert evse_step(s, 8.79, charger2, 0.01) == s
    assert replug(s) == evse_initial()


def _offer(v, duty=26.7):
    return Perception(v_high=v, duty=duty, pwm_present=True)


def test_ev_handshake(ev):
    s = ev_initial(plugged=True)
    s = ev_step(s, _offer(8.79), ev, "start_charging", 0.01)
    assert s.presented_load == ev.r_state_b and s.state is S.B
    for _ in range(int(ev.handshake_delay / 0.01) + 1):
        s = ev_step(s, _offer(8.79), ev, None, 0.01)
    assert s.presented_load == ev.r_state_c


def test_ev_ignores_digital_band_offer(ev):
    s = ev_initial(plugged=True, charge_requested=True)
    for _ in range(200):
        s = ev_step(s, _offer(8.79, duty=5.0), ev, None, 0.01)
    assert s.presented_load == ev.r_state_b


def test_ev_stop_returns_to_b_load(ev):
    s = MachineStatus(side="EV", state=S.C, presented_load=ev.r_state_c, plugged=True, charge_requested=True)
    s = ev_step(s, _offer(5.62), ev, "stop_charging", 0.01)
    assert s.presented_load == ev.r_state_b and not s.charge_requested


def test_ev_low_pilot_latches_after_debounce(ev):
    s = ev_initial(plugged=True)
    s = ev_step(s, _offer(3.0), ev, None, 0.1)
    assert not s.latched_error
    s = ev_step(s, _offer(3.0), ev, None, 0.1)
    assert s.latched_error and s.error_kind == "low_pilot_voltage"
    assert s.presented_load == OPEN and s.state is S.F
    assert ev_step(s, _offer(8.79), ev, "start_charging", 0.01) == s
    cleared = replug(s)
    assert not cleared.latched_error and cleared.plugged


def test_ev_off_band_is_communication_error(ev):
    s = ev_initial(plugged=True)
    for _ in range(30):
        s = ev_step(s, _offer(6.2), ev, None, 0.01)  # B load but C-level pilot
    assert s.latched_error and s.error_kind == "communication"


def test_unplugged_ev_is_a(ev):
    s = ev_step(ev_initial(), _offer(8.79), ev, None, 0.01)
    assert s.state is S.A


def test_wrong_side_rejected(ev, charger2):
    with pytest.raises(ValueError):
        ev_step(evse_initial(), _offer(9), ev)
    with pytest.raises(ValueError):
        evse_step(ev_initial(), 9, charger2, 0.01)
    with pytest.raises(ValueError):
        ev_step(ev_initial(plugged=True), _offer(9), ev, "dance")


def test_disparity_detection():
    assert not detect_disparity(S.B, S.C, 0.3, 0.5)
    assert detect_disparity(S.B, S.C, 0.5, 0.5)
    assert not detect_disparity(S.C, S.C, 10, 0.5)
    with pytest.raises(ValueError):
        detect_disparity(S.B, S.C, -1, 0.5)
