"""Transition diagnostics: observables, fidelity, parameter scans, bifurcations, power laws."""
import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as la
from scipy import optimize

from . import operators as ops
from . import spectra
from .errors import FitError, InvalidStateError, LindspecError, NotFoundError, ParameterError
from .liouville import build_liouvillian
from .models import kerr_thermo, tail_population, two_photon_thermo
from .symmetry import number_parity_symmetry, sector_decompose

SCAN_COLUMNS = ("zeta", "N", "gap", "im_lambda1", "density", "one_minus_f", "f_plus",
                "f_minus", "status")


def default_workers():
    env = os.environ.get("LINDSPEC_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def expectation(rho, o, tol=1e-10):
    """``Tr[rho O]`` for Hermitian ``O``; the imaginary part must vanish to ``tol``."""
    if not ops.is_hermitian(o, 1e-10):
        raise ParameterError("observable is not Hermitian")
    rho = ops.dense(rho)
    if rho.shape != o.shape:
        raise ParameterError(f"state shape {rho.shape} does not match observable {o.shape}")
    # Tr[rho O] = sum_ij rho_ij O_ji
    val = complex(np.sum(rho * ops.dense(o).T))
    if abs(val.imag) > tol * max(1.0, abs(val.real)):
        raise InvalidStateError(f"expectation value has imaginary part {val.imag:.3e}")
    return val.real


def _psd_sqrt(rho):
    w, u = la.eigh(rho)
    return (u * np.sqrt(np.clip(w, 0.0, None))) @ u.conj().T


def _validated(rho, name, floor, tol):
    rho = ops.dense(rho)
    if not ops.is_hermitian(rho, tol):
        raise InvalidStateError(f"{name} is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise InvalidStateError(f"{name} has trace {np.trace(rho).real:.6g}, expected 1")
    return spectra.clip_density_matrix(rho, floor)


def fidelity(rho, xi, floor=1e-10, tol=1e-8):
    """Uhlmann fidelity ``Tr sqrt(sqrt(rho) xi sqrt(rho))``, clipped to [0, 1]."""
    rho = _validated(rho, "rho", floor, tol)
    xi = _validated(xi, "xi", floor, tol)
    s = _psd_sqrt(rho)
    m = s @ xi @ s
    w = la.eigvalsh(0.5 * (m + m.conj().T))
    return float(min(1.0, max(0.0, np.sqrt(np.clip(w, 0.0, None)).sum())))


def trace_distance(rho, sigma):
    d = ops.dense(rho) - ops.dense(sigma)
    return float(0.5 * np.abs(la.eigvalsh(0.5 * (d + d.conj().T))).sum())


@dataclass
class ScanRecord:
    zeta: float
    N: float
    gap: float = math.nan
    im_lambda1: float = math.nan
    density: float = math.nan
    fid_xi: float = math.nan
    fid_plus: float = math.nan
    fid_minus: float = math.nan
    jordan_flag: bool = None
    status: str = "ok"
    cutoff: int = 0
    tail: float = math.nan
    sector: int = None
    eigenvalues: list = field(default_factory=list, repr=False)
    states: dict = field(default=None, repr=False)

    @property
    def one_minus_f(self):
        return 1.0 - self.fid_xi

    @property
    def ok(self):
        return self.status == "ok"

    def row(self):
        return {
            "zeta": self.zeta, "N": self.N, "gap": self.gap, "im_lambda1": self.im_lambda1,
            "density": self.density, "one_minus_f": self.one_minus_f,
            "f_plus": self.fid_plus, "f_minus": self.fid_minus, "status": self.status,
        }


def kerr_family(delta=10.0, u_tilde=10.0, gamma=1.0):
    """``(f_tilde, n, cutoff) -> ModelSpec`` for the coherently driven Kerr resonator."""
    def family(zeta, n, cutoff=None):
        return kerr_thermo(delta, u_tilde, zeta, gamma, n, cutoff)
    return family


def two_photon_family(delta=-10.0, u_tilde=10.0, rate_eta_tilde=1.0, gamma=1.0):
    """``(g, n, cutoff) -> ModelSpec`` for the two-photon driven Kerr resonator."""
    def family(zeta, n, cutoff=None):
        return two_photon_thermo(delta, u_tilde, zeta, gamma, rate_eta_tilde, n, cutoff)
    return family


def slowest_mode(model, k=6, symmetry=None, sector=None, seed=42):
    """Steady state and spectrum whose ``pairs[1]`` is the slowest decaying mode.

    With ``symmetry`` (order ``n`` of the number-parity symmetry) the eigenproblem is
    solved per sector; ``sector`` then restricts the slow mode to that sector, in which
    case the returned spectrum has the steady state prepended from the z=1 block.
    """
    sm = build_liouvillian(model)
    if symmetry is None:
        spec = spectra.leading_spectrum(sm, k=min(k, sm.size), seed=seed)
        return spectra.steady_state(sm, spectrum=spec), spec
    dec = sector_decompose(sm, number_parity_symmetry(model.dim, symmetry))
    wanted = None if sector is None else {0, sector % symmetry}
    parts = dec.leading_spectra(k=k, sectors=wanted, seed=seed)
    even = parts[0]
    rho = dec.steady_state(spectrum=even)
    if sector is None or sector % symmetry == 0:
        return rho, spectra.merge_spectra(list(parts.values()))
    spec = parts[sector % symmetry]
    pairs = [even.pairs[0]] + list(spec.pairs)
    for i, p in enumerate(pairs):
        p.index = i
    return rho, spectra.Spectrum(pairs, even.zero_tol, max(even.norm1, spec.norm1))


def _oriented_split(pair, observable, im_tol):
    if abs(pair.value.imag) > im_tol:
        return None
    split = spectra.hermitian_split(pair, im_tol=im_tol)
    if expectation(split.plus, observable) < expectation(split.minus, observable):
        split = split.swapped()
    return split


def scan_point(family, zeta, n, k=6, cutoff=None, symmetry=None, sector=None,
               im_tol=None, tail_tol=1e-8, keep_states=False, seed=42):
    """Analyse one grid point; solver failures are reported in ``status``."""
    rec = ScanRecord(float(zeta), float(n))
    try:
        for attempt in range(2):
            model = family(zeta, n, cutoff)
            rho, spec = slowest_mode(model, k, symmetry, sector, seed)
            if "cutoff" not in model.meta:
                break
            # truncated bosonic mode: retry once on a larger cutoff if the tail is populated
            rec.tail = tail_population(rho)
            if rec.tail <= tail_tol or attempt == 1:
                break
            cutoff = int(math.ceil(1.5 * model.dim))
        rec.cutoff = model.dim
        if rec.tail > tail_tol:
            rec.status = f"tail population {rec.tail:.2e} above {tail_tol:g}"
        tol = spectra.IM_TOL_REL * model.rate_scale if im_tol is None else im_tol
        lam = spec.lambda1
        p1 = spec.pairs[1]
        rec.gap, rec.im_lambda1, rec.sector = abs(lam.real), lam.imag, p1.sector
        rec.eigenvalues = [complex(p.value) for p in spec.pairs]
        if len(spec.pairs) > 2:
            rec.jordan_flag = bool(abs(spec.pairs[2].value - lam) <= 1e-6 * model.rate_scale)
        num = ops.number(model.dim)
        rec.density = expectation(rho, num) / n
        split = _oriented_split(p1, num, tol)
        if split is not None:
            rec.fid_xi = fidelity(rho, split.mixture)
            rec.fid_plus = fidelity(rho, split.plus)
            rec.fid_minus = fidelity(rho, split.minus)
        if keep_states:
            rec.states = {"rho_ss": rho, "mode": p1.right, "split": split}
    except (LindspecError, ArithmeticError, RuntimeError, ValueError) as exc:
        rec.status = f"{type(exc).__name__}: {exc}"
    return rec


def scan(family, zeta_grid, n, k=6, cutoff=None, symmetry=None, sector=None, workers=None,
         **kwargs):
    """One ScanRecord per grid value, in grid order; points are solved concurrently."""
    grid = np.asarray(zeta_grid, dtype=float)
    if grid.size == 0:
        raise ParameterError("empty scan grid")
    if np.any(np.diff(grid) <= 0):
        raise ParameterError("scan grid must be strictly ascending")
    workers = default_workers() if workers is None else max(1, int(workers))

    def job(z):
        return scan_point(family, z, n, k, cutoff, symmetry, sector, **kwargs)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(job, grid))
    return [job(z) for z in grid]


def refine_gap_minimum(family, n, bounds, k=4, cutoff=None, symmetry=None, sector=None,
                       xatol=1e-6):
    """Drive value minimizing the gap inside ``bounds`` (bounded Brent search)."""
    def gap(z):
        _, spec = slowest_mode(family(z, n, cutoff), k, symmetry, sector)
        return spec.gap

    res = optimize.minimize_scalar(gap, bounds=bounds, method="bounded",
                                   options={"xatol": xatol})
    return float(res.x), float(res.fun)


def fidelity_window(records, threshold=1e-2):
    """``(lo, hi)`` grid extent of the run with ``1 - f < threshold`` around the gap minimum."""
    good = [r for r in records if r.ok and not math.isnan(r.gap)]
    if not good:
        raise NotFoundError("no successful scan points", {"points": len(records)})
    i = int(np.argmin([r.gap for r in good]))
    inside = [r.one_minus_f < threshold for r in good]
    if not inside[i]:
        raise NotFoundError(f"1 - f at the gap minimum exceeds {threshold:g}",
                            {"zeta": good[i].zeta, "one_minus_f": good[i].one_minus_f})
    lo = hi = i
    while lo > 0 and inside[lo - 1]:
        lo -= 1
    while hi < len(good) - 1 and inside[hi + 1]:
        hi += 1
    return good[lo].zeta, good[hi].zeta


def bifurcation_point(records, im_tol=1e-8, evaluate=None, rtol=1e-3, persist=3):
    """Drive value where the slowest eigenvalue pair switches between complex and real.

    The switch is the first grid point whose real/complex character differs from its
    predecessor and persists for ``persist`` points; with ``evaluate(zeta) -> Im lambda_1``
    the bracket is bisected to relative width ``rtol`` and the real-side end returned.
    """
    good = [r for r in records if not math.isnan(r.im_lambda1)]
    zs = np.array([r.zeta for r in good])
    real = [abs(r.im_lambda1) <= im_tol for r in good]
    for i in range(1, len(good)):
        run = real[i:i + persist]
        if real[i] != real[i - 1] and len(run) == min(persist, len(good) - i) and all(
                x == real[i] for x in run):
            lo, hi = zs[i - 1], zs[i]
            real_hi = real[i]
            break
    else:
        raise NotFoundError("no complex/real switch of lambda_1 in the scanned range", {
            "zeta_range": [float(zs.min()), float(zs.max())] if len(zs) else None,
            "min_abs_im": float(np.min(np.abs([r.im_lambda1 for r in good]))) if good else None,
            "points": len(records),
        })
    if evaluate is not None:
        while hi - lo > rtol * max(abs(lo), abs(hi)):
            mid = 0.5 * (lo + hi)
            if (abs(evaluate(mid)) <= im_tol) == real_hi:
                hi = mid
            else:
                lo = mid
    return float(hi if real_hi else lo)


def locate_bifurcation(family, n, grid, k=4, cutoff=None, symmetry=None, sector=None,
                       im_tol=None, seed=42, workers=None, rtol=1e-3):
    """``G_B(n)``: coarse scan over ``grid`` then bisection of the complex/real switch."""
    records = scan(family, grid, n, k, cutoff, symmetry, sector, workers, seed=seed)
    if im_tol is None:
        im_tol = spectra.IM_TOL_REL * family(grid[0], n, cutoff).rate_scale

    def im_at(z):
        _, spec = slowest_mode(family(z, n, cutoff), k, symmetry, sector, seed)
        return spec.lambda1.imag

    return bifurcation_point(records, im_tol=im_tol, evaluate=im_at, rtol=rtol)


@dataclass
class PowerLawFit:
    """``G_B(N) = critical_value + amplitude * N**(-exponent)``."""
    amplitude: float
    exponent: float
    critical_value: float
    residual: float
    covariance: list = None
    points: list = None

    def predict(self, n):
        return self.critical_value + self.amplitude * np.asarray(n, dtype=float) ** -self.exponent

    def to_dict(self):
        return asdict(self)

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)


def power_law_fit(points, critical_value=None):
    """Fit ``G_B(N) = G_c + A N**(-exponent)``; straight line ``log(G_B - G_c)`` vs ``log N``.

    The parameters minimize the squared misfit of ``G_B`` itself: in log space alone
    the objective keeps decreasing as ``G_c -> -inf``. ``G_c`` is free unless
    ``critical_value`` is given. ``residual`` is the RMS misfit of ``log(G_B - G_c)``.
    """
    pts = [(float(n), float(g)) for n, g in points]
    if len(pts) < 4:
        raise FitError(f"power-law fit needs at least 4 points, got {len(pts)}", [])
    n = np.array([p[0] for p in pts])
    g = np.array([p[1] for p in pts])
    if np.any(np.diff(n) <= 0) or np.any(n <= 0):
        raise FitError("N values must be positive and strictly increasing", [])
    logn = np.log(n)
    span = g.max() - g.min()
    if span <= 0:
        raise FitError("G_B does not vary with N", [])
    top = g.min()
    trace = []

    def unpack(x):
        return x if critical_value is None else (critical_value, *x)

    def resid(x):
        gc, loga, e = unpack(x)
        trace.append([float(v) for v in x])
        return g - gc - np.exp(loga - e * logn)

    def line(gc):
        slope, icpt = np.polyfit(logn, np.log(g - gc), 1)
        return icpt, -slope

    if critical_value is None:
        # seed from the straight log-log line that best fits the data on the G scale
        cands = top - span * np.logspace(-3, 2, 101)
        x0 = min(([c, *line(c)] for c in cands), key=lambda x: np.sum(resid(x) ** 2))
        trace.clear()
    else:
        if critical_value >= top:
            raise FitError("critical value must lie below every G_B", [])
        x0 = list(line(critical_value))
    try:
        res = optimize.least_squares(resid, x0, method="lm", xtol=1e-15, ftol=1e-15,
                                     gtol=1e-15, max_nfev=10_000)
    except (ValueError, FloatingPointError) as exc:
        raise FitError(f"power-law fit failed: {exc}", trace) from exc
    gc, loga, e = unpack(res.x)
    if res.status <= 0 or not np.all(np.isfinite(res.x)) or gc >= top:
        raise FitError(f"power-law fit did not converge: {res.message}", trace)
    dof = max(1, len(pts) - len(res.x))
    s2 = float(np.sum(res.fun ** 2)) / dof
    cov = np.linalg.pinv(res.jac.T @ res.jac) * s2
    # report covariance in (G_c, A, exponent) using dA = A dlogA
    scale = np.array([1.0, np.exp(loga), 1.0])[-len(res.x):]
    cov = cov * np.outer(scale, scale)
    logres = np.log(g - gc) - (loga - e * logn)
    return PowerLawFit(float(np.exp(loga)), float(e), float(gc),
                       float(np.sqrt(np.mean(logres ** 2))), cov.tolist(),
                       [[a, b] for a, b in pts])


def track_eigenvalues(rows):
    """Match eigenvalue lists across successive scan points.

    The cost of pairing ``mu`` with ``lambda`` is their Euclidean distance in the complex
    plane; each step is solved as a linear assignment. Returns an array ``(points, k)``
    with NaN where a branch has no partner.
    """
    k = min(len(r) for r in rows)
    out = np.full((len(rows), k), np.nan, dtype=complex)
    out[0] = np.asarray(rows[0])[:k]
    for i in range(1, len(rows)):
        cur = np.asarray(rows[i])
        cost = np.abs(out[i - 1][:, None] - cur[None, :])
        r, c = optimize.linear_sum_assignment(cost)
        out[i, r] = cur[c]
    return out


def scan_csv(records, comment=None):
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCAN_COLUMNS)
    for r in records:
        row = r.row()
        w.writerow([f"{row[c]:.12g}" if isinstance(row[c], float) else row[c]
                    for c in SCAN_COLUMNS])
    return buf.getvalue()
