"""Builders for the driven-dissipative models studied here.

All Hamiltonians use hbar = 1. A jump ``(op, rate)`` enters the master equation as
``rate/2 * (2 op rho op^+ - op^+ op rho - rho op^+ op)``.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import operators as ops
from .errors import ParameterError, ShapeError


@dataclass(frozen=True)
class ModelSpec:
    hamiltonian: object
    jumps: tuple
    dim: int
    meta: dict = field(default_factory=dict)
    kind: str = "custom"

    def __post_init__(self):
        dim = ops.check_dim(self.dim)
        h = ops.as_operator(self.hamiltonian)
        if h.shape != (dim, dim):
            raise ShapeError(f"Hamiltonian has shape {h.shape}, expected {(dim, dim)}")
        if not ops.is_hermitian(h, 1e-12):
            raise ParameterError("Hamiltonian is not Hermitian")
        jumps = []
        for op, rate in self.jumps:
            op = ops.as_operator(op)
            if op.shape != (dim, dim):
                raise ShapeError(f"jump operator has shape {op.shape}, expected {(dim, dim)}")
            rate = float(rate)
            if not rate >= 0:
                raise ParameterError(f"jump rates must be >= 0, got {rate}")
            jumps.append((op, rate))
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "jumps", tuple(jumps))
        object.__setattr__(self, "dim", dim)

    @property
    def rate_scale(self):
        """Largest jump rate (1.0 when there is none); sets the scale of tolerances."""
        rates = [r for _, r in self.jumps if r > 0]
        return max(rates) if rates else 1.0

    def to_config(self):
        if self.kind == "custom":
            raise ParameterError("custom models cannot be serialized to a config")
        return {"type": self.kind, **self.meta}


def default_cutoff(n):
    """Fock cutoff used for scans at thermodynamic parameter ``n``."""
    return max(20, math.ceil(8 * n))


def tail_population(rho, levels=2):
    """Population held by the top ``levels`` Fock states of ``rho``."""
    diag = np.real(np.diag(ops.dense(rho)))
    return float(np.sum(np.abs(diag[-levels:])))


def _positive(name, value):
    if not value > 0:
        raise ParameterError(f"{name} must be > 0, got {value}")


def _cutoff(cutoff):
    if cutoff is None or int(cutoff) != cutoff or cutoff < 2:
        raise ParameterError(f"cutoff must be an integer >= 2, got {cutoff!r}")
    return int(cutoff)


def _kerr_hamiltonian(delta, u, cutoff):
    a = ops.destroy(cutoff)
    ad = ops.dag(a)
    return a, ad, -delta * (ad @ a) + (u / 2) * (ad @ ad @ a @ a)


def kerr_model(delta, u, f, gamma, cutoff):
    """Coherently driven Kerr resonator, H = -delta a^+a + u/2 a^+a^+aa + f(a^+ + a)."""
    _positive("gamma", gamma)
    cutoff = _cutoff(cutoff)
    a, ad, h = _kerr_hamiltonian(delta, u, cutoff)
    h = h + f * (ad + a)
    meta = dict(delta=delta, u=u, f=f, gamma=gamma, cutoff=cutoff)
    return ModelSpec(h, ((a, gamma),), cutoff, meta, "kerr")


def kerr_thermo(delta, u_tilde, f_tilde, gamma, n, cutoff=None):
    """Kerr resonator with u = u_tilde/n and f = f_tilde*sqrt(n)."""
    _positive("n", n)
    cutoff = default_cutoff(n) if cutoff is None else cutoff
    m = kerr_model(delta, u_tilde / n, f_tilde * math.sqrt(n), gamma, cutoff)
    meta = dict(delta=delta, u_tilde=u_tilde, f_tilde=f_tilde, gamma=gamma, n=n,
                cutoff=m.dim, u=u_tilde / n, f=f_tilde * math.sqrt(n))
    return ModelSpec(m.hamiltonian, m.jumps, m.dim, meta, "kerr_thermo")


def two_photon_model(delta, u, g, gamma, rate_eta, cutoff):
    """Kerr resonator with two-photon drive ``g`` and two-photon loss ``rate_eta``."""
    _positive("gamma", gamma)
    if not rate_eta >= 0:
        raise ParameterError(f"two-photon loss rate must be >= 0, got {rate_eta}")
    cutoff = _cutoff(cutoff)
    a, ad, h = _kerr_hamiltonian(delta, u, cutoff)
    h = h + (g / 2) * (ad @ ad + a @ a)
    meta = dict(delta=delta, u=u, g=g, gamma=gamma, rate_eta=rate_eta, cutoff=cutoff)
    return ModelSpec(h, ((a, gamma), (a @ a, rate_eta)), cutoff, meta, "two_photon")


def two_photon_thermo(delta, u_tilde, g, gamma, rate_eta_tilde, n, cutoff=None):
    """Two-photon model with u = u_tilde/n and rate_eta = rate_eta_tilde/n."""
    _positive("n", n)
    cutoff = default_cutoff(n) if cutoff is None else cutoff
    m = two_photon_model(delta, u_tilde / n, g, gamma, rate_eta_tilde / n, cutoff)
    meta = dict(delta=delta, u_tilde=u_tilde, g=g, gamma=gamma,
                rate_eta_tilde=rate_eta_tilde, n=n, cutoff=m.dim,
                u=u_tilde / n, rate_eta=rate_eta_tilde / n)
    return ModelSpec(m.hamiltonian, m.jumps, m.dim, meta, "two_photon_thermo")


def two_level_model(omega, epsilon, gamma):
    """Spin-1/2 with H = omega/2 sigma_z, decay (sigma^-, epsilon) and (sigma^x, gamma).

    The Liouvillian is defective at ``omega == gamma``.
    """
    _positive("gamma", gamma)
    if not epsilon >= 0:
        raise ParameterError(f"epsilon must be >= 0, got {epsilon}")
    h = 0.5 * omega * ops.sigma_z()
    jumps = ((ops.sigma_minus(), epsilon), (ops.sigma_x(), gamma))
    return ModelSpec(h, jumps, 2, dict(omega=omega, epsilon=epsilon, gamma=gamma), "two_level")


BUILDERS = {
    "kerr": (kerr_model, ("delta", "u", "f", "gamma", "cutoff")),
    "kerr_thermo": (kerr_thermo, ("delta", "u_tilde", "f_tilde", "gamma", "n", "cutoff")),
    "two_photon": (two_photon_model, ("delta", "u", "g", "gamma", "rate_eta", "cutoff")),
    "two_photon_thermo": (two_photon_thermo,
                          ("delta", "u_tilde", "g", "gamma", "rate_eta_tilde", "n", "cutoff")),
    "two_level": (two_level_model, ("omega", "epsilon", "gamma")),
}

# parameters that may be omitted from a config
OPTIONAL = {"cutoff": None}


def model_params(kind):
    try:
        return BUILDERS[kind][1]
    except KeyError:
        raise ParameterError(f"unknown model type {kind!r}; expected one of {sorted(BUILDERS)}")


def build_model(config):
    """Build a ModelSpec from a ``{"type": ..., <params>}`` mapping."""
    config = dict(config)
    kind = config.pop("type", None)
    names = model_params(kind)
    builder = BUILDERS[kind][0]
    kwargs = {}
    for name in names:
        if name in config:
            kwargs[name] = config.pop(name)
        elif name in OPTIONAL and kind.endswith("thermo"):
            kwargs[name] = OPTIONAL[name]
        else:
            raise ParameterError(f"model {kind!r} is missing parameter {name!r}")
    # derived values written by to_config() are ignored on the way back in
    for derived in ("u", "f", "rate_eta"):
        config.pop(derived, None)
    if config:
        raise ParameterError(f"unknown parameters for model {kind!r}: {sorted(config)}")
    return builder(**kwargs)
