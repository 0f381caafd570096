import functools

import pytest

from photocount import LaserParams, ModeEnsemble, build_response_curve

# (kappa, mean escape rate) of the four fig2 density presets; A = 1, B = 0.005, t = 1, beta = M = 1
FIG2 = {
    "fig2a-solid": (0.7, 0.02),
    "fig2a-dashed": (0.7, 0.2),
    "fig2b-solid": (2.0, 0.5),
    "fig2b-dashed": (2.0, 4.0),
}

ACCEPTANCE_LINES = []


def laser(kappa, A=1.0, B=0.005, t=1.0):
    return LaserParams(gain_A=A, saturation_B=B, absorption_kappa=kappa, counting_time_t=t)


def ensemble(mean_gamma, beta=1, M=1):
    return ModeEnsemble(beta=beta, channels_M=M, mean_gamma=mean_gamma)


@functools.lru_cache(maxsize=None)
def preset_curve(name, r=1):
    kappa, gbar = FIG2[name]
    return build_response_curve(laser(kappa), r, 20.0 * gbar, 400)


@functools.lru_cache(maxsize=None)
def preset_density(name, r=1):
    from photocount import density_deterministic
    from photocount.count_density import mc_bin_edges

    curve = preset_curve(name, r)
    return density_deterministic(curve, ensemble(FIG2[name][1]), bin_edges=mc_bin_edges(curve.mu_max, 400))


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance check, printed in the terminal summary."""

    def _report(label, passed, detail):
        ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
