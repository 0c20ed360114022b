"""Shared builders for linearized systems used across the test modules."""

from mimcool import coupling
from mimcool.params import derive
from mimcool.steady_state import LinearizedParams, linearize, steady_state_at


def linearized(config, delta):
    derived = derive(config)
    exp_ = coupling.expand(config.reflectivity, derived.eta0)
    ss = steady_state_at(derived, exp_.epsilon, exp_.sigma, delta)
    return ss, linearize(ss, derived, exp_.epsilon, exp_.sigma)


def bare_lp(omega_m=1.0, gamma=1e-3, kappa=0.2, delta=1.0, nbar=10.0, n_th=0.0,
            G_R=0.0, G_I=0.0):
    """Linearized system with no sigma shifts (Omega1 = Omega2 = omega_m)."""
    return LinearizedParams(Omega_m=omega_m, Omega1=omega_m, Omega2=omega_m,
                            Gamma1=gamma, Gamma2=gamma, G_R=G_R, G_I=G_I,
                            delta=delta, kappa=kappa, gamma=gamma, nbar=nbar, n_th=n_th)


def skewed_lp(n_th=0.0):
    """A stable system where every sigma-induced term is sizeable.

    gamma is not tiny against kappa and the splittings are O(1), so each
    printed-formula variant produces a visible error.
    """
    return LinearizedParams(Omega_m=1.0, Omega1=1.1, Omega2=0.9, Gamma1=0.15, Gamma2=0.05,
                            G_R=0.12, G_I=0.05, delta=0.8, kappa=0.3, gamma=0.1,
                            nbar=3.0, n_th=n_th)


def rel(a, b):
    return abs(a - b) / abs(b)
