"""Measured quantities along runs: weighted norms, the analyticity-radius
estimate read off the Fourier tail, conservation residuals, the reformulated
complex unknown, and the headline radius-decay experiment.

The radius of a field is estimated from the exponential decay rate of shell
maxima of its coefficients: a least-squares fit of ln max_{|xi| in [k,k+1)}
|u_hat| against k, over shells above a noise floor and below the top third of
the band.  The estimate is exact on pure exponential spectra; polynomial
prefactors bias it (documented where it matters).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dn import DNResult
from .spectral import (
    Lattice,
    SpectralField,
    analytic_norm,
    apply_multiplier,
    dn_symbol,
)

_TWO_PI = 2.0 * math.pi


@dataclass
class RadiusEstimate:
    sigma_est: float
    fit_window: tuple
    rms_residual: float
    usable: bool


def shell_maxima(u: SpectralField) -> np.ndarray:
    """A_k = max over |xi| in [k, k+1) of |u_hat|, k = 0 .. floor(max |xi|)."""
    lat = u.lattice
    absk = lat.abs_k.ravel()
    amp = np.abs(u.coeffs).ravel()
    kmax = int(np.floor(absk.max()))
    out = np.zeros(kmax + 1)
    shell = np.floor(absk).astype(int)
    np.maximum.at(out, shell, amp)
    return out


def estimate_radius(u: SpectralField, noise_floor: float = 1e-13,
                    min_shells: int = 5) -> RadiusEstimate:
    """Fit ln A_k vs k on shells with A_k > noise_floor, 2 <= k <= 2M/3.

    sigma_est is minus the fitted slope; the estimate is unusable when fewer
    than ``min_shells`` shells clear the floor (or the slope comes out with
    the wrong sign)."""
    A = shell_maxima(u)
    kcap = int((2.0 * u.lattice.M) / 3.0)
    ks = np.array([k for k in range(2, min(len(A), kcap + 1)) if A[k] > noise_floor])
    if len(ks) < min_shells:
        return RadiusEstimate(0.0, (0, 0), math.inf, usable=False)
    y = np.log(A[ks])
    coef = np.polyfit(ks, y, 1)
    fit = np.polyval(coef, ks)
    rms = float(np.sqrt(np.mean((y - fit) ** 2)))
    sigma = float(-coef[0])
    return RadiusEstimate(sigma_est=sigma, fit_window=(int(ks[0]), int(ks[-1])),
                          rms_residual=rms, usable=sigma >= 0.0)


# ---------------------------------------------------------------------------
# weighted norms of the state
# ---------------------------------------------------------------------------

MEASUREMENT_FLOOR = 1e-13


def spectral_floor(u: SpectralField, rel: float = MEASUREMENT_FLOOR) -> SpectralField:
    """Zero coefficients below rel * max|u_hat|.

    Exponentially weighted norms of computed fields are otherwise dominated
    by the flat FFT round-off tail (~1e-16 of the field scale), which the
    e^{sigma |xi|} weight amplifies beyond any signal.  True analytic
    coefficients decay exponentially, so a relative floor separates them."""
    amp = np.abs(u.coeffs)
    top = float(amp.max())
    if top == 0.0:
        return u
    c = np.where(amp >= rel * top, u.coeffs, 0.0)
    return SpectralField(u.lattice, np.ascontiguousarray(c), hermitian=u.hermitian)


def norms_snapshot(state, dn: DNResult, sched, s: float,
                   floor: float = MEASUREMENT_FLOOR) -> tuple:
    """The four tracked components at sigma(t):

        ( ||eta||_{s+1/2}, ||a(D)^(1/2) psi||_s, ||V||_s, ||B||_s ),

    vector V entering through the Euclidean combination of its components.
    All fields pass through the spectral measurement floor first."""
    lat = state.eta.lattice
    sig = max(sched.sigma(state.t), 0.0)
    half = np.sqrt(dn_symbol(lat))
    c1 = analytic_norm(spectral_floor(state.eta, floor), (sig, s + 0.5))
    c2 = analytic_norm(spectral_floor(apply_multiplier(half, state.psi), floor), (sig, s))
    c3 = math.sqrt(sum(analytic_norm(spectral_floor(comp, floor), (sig, s)) ** 2
                       for comp in dn.V))
    c4 = analytic_norm(spectral_floor(dn.B, floor), (sig, s))
    return (c1, c2, c3, c4)


def measured_data_size(eta0, psi0, dn0: DNResult, config,
                       floor: float = MEASUREMENT_FLOOR) -> float:
    """The size the schedule scales with: the four-component norm at t=0 plus
    the source norm over the run window."""
    lat = eta0.lattice
    lh = config.lam * lat.h
    half = np.sqrt(dn_symbol(lat))
    total = (analytic_norm(spectral_floor(eta0, floor), (lh, config.s_norm + 0.5))
             + analytic_norm(spectral_floor(apply_multiplier(half, psi0), floor),
                             (lh, config.s_norm))
             + math.sqrt(sum(analytic_norm(spectral_floor(c, floor),
                                           (lh, config.s_norm)) ** 2 for c in dn0.V))
             + analytic_norm(spectral_floor(dn0.B, floor), (lh, config.s_norm)))
    return total + source_norm(config.bottom, lat, config.s_norm, config.T_final)


def source_norm(b_src, lattice: Lattice, s: float, T: float, nsamp: int = 200) -> float:
    """N_s(b): sup-in-time of ||b||_{H^{s+1/2}} and ||d_t b||_{H^{s-1/2}} plus
    the time integral of ||b||_{H^{s+1/2}}, sampled on [0, T]."""
    if b_src.is_zero():
        return 0.0
    ts = np.linspace(0.0, T, nsamp)
    sup_b = 0.0
    sup_db = 0.0
    vals = np.empty(nsamp)
    for i, t in enumerate(ts):
        nb = analytic_norm(b_src.b_field(lattice, t), (0.0, s + 0.5))
        ndb = analytic_norm(b_src.db_dt_field(lattice, t), (0.0, s - 0.5))
        vals[i] = nb
        sup_b = max(sup_b, nb)
        sup_db = max(sup_db, ndb)
    return sup_b + sup_db + float(np.trapezoid(vals, ts))


# ---------------------------------------------------------------------------
# reformulated unknown
# ---------------------------------------------------------------------------

@dataclass
class ReformulatedState:
    """zeta = grad eta, the traces (B, V), and u = sqrt(g) zeta + i a(D)^(1/2) V
    (per component for d=2); weighted norms of U_s = e^{sigma<D>}<D>^{s-1/2} u
    are computed on demand since the weight table can be enormous."""

    zeta: tuple
    B: SpectralField
    V: tuple
    u: tuple
    sigma: float
    s: float

    def us_norm(self, mu: float) -> float:
        """||U_s||_{H^mu} summed over components, log-domain safe."""
        lat = self.u[0].lattice
        br = lat.bracket_k
        total_sq = 0.0
        for comp in self.u:
            amp = np.abs(comp.coeffs)
            mask = amp > 0.0
            if not mask.any():
                continue
            logt = (2.0 * self.sigma) * br[mask] \
                + (2.0 * (self.s - 0.5) + 2.0 * mu) * np.log(br[mask]) \
                + 2.0 * np.log(amp[mask])
            top = float(logt.max())
            total_sq += math.exp(top) * float(np.sum(np.exp(logt - top)))
        return math.sqrt(total_sq)


def reformulate(state, dn: DNResult, sched, s: float,
                floor: float = MEASUREMENT_FLOOR) -> ReformulatedState:
    lat = state.eta.lattice
    sig = max(sched.sigma(state.t), 0.0)
    zeta = tuple(SpectralField(lat, np.ascontiguousarray(1j * k * state.eta.coeffs),
                               hermitian=state.eta.hermitian) for k in lat.k_axes)
    half = np.sqrt(dn_symbol(lat))
    u = tuple(spectral_floor(SpectralField(lat, np.ascontiguousarray(
        math.sqrt(lat.g) * z.coeffs + 1j * half * v.coeffs)), floor)
        for z, v in zip(zeta, dn.V))
    return ReformulatedState(zeta=zeta, B=dn.B, V=dn.V, u=u, sigma=sig, s=s)


def energy_Es(times, us_l2, us_h12, K: float, eps: float) -> np.ndarray:
    """E_s(t) = ||U_s(t)||_{L2}^2 + 2 K eps * int_0^t ||U_s||_{H^(1/2)}^2,
    with the integral accumulated by the trapezoidal rule (monotone)."""
    times = np.asarray(times, float)
    l2 = np.asarray(us_l2, float)
    h12 = np.asarray(us_h12, float)
    out = np.empty_like(times)
    acc = 0.0
    out[0] = l2[0] ** 2
    for i in range(1, len(times)):
        acc += 0.5 * (h12[i] ** 2 + h12[i - 1] ** 2) * (times[i] - times[i - 1])
        out[i] = l2[i] ** 2 + 2.0 * K * eps * acc
    return out


# ---------------------------------------------------------------------------
# run record
# ---------------------------------------------------------------------------

CSV_COLUMNS = ("t", "ms_eta", "ms_psi", "ms_V", "ms_B", "ms_max",
               "mass", "hamiltonian", "sigma_est", "sigma_usable", "fit_rms",
               "us_l2", "us_h12", "Es")


@dataclass
class RunRecord:
    """Time series of everything measured along one run."""

    config: object
    dt: float
    times: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    fields: list = field(default_factory=list)       # (eta, psi, G, B, V) coeffs
    schedule: object = None
    stop_reason: str = "incomplete"
    stop_detail: str = ""
    _ms_max: float = 0.0

    def config_hash(self) -> str:
        from .cli import emit_config
        text = emit_config(self.config)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def append(self, state, dn: DNResult) -> dict:
        cfg = self.config
        lat = state.eta.lattice
        ms = norms_snapshot(state, dn, self.schedule, cfg.s_norm)
        self._ms_max = max(self._ms_max, sum(ms))
        mass = (_TWO_PI ** lat.d) * float(np.real(state.eta.mean))
        ham = float("nan")
        if cfg.bottom.is_zero():
            ham = hamiltonian(state.eta, state.psi, dn)
        amp_top = float(np.max(np.abs(state.eta.coeffs)))
        est = estimate_radius(state.eta,
                              noise_floor=cfg.noise_floor * max(amp_top, 1e-300),
                              min_shells=cfg.min_shells)
        ref = reformulate(state, dn, self.schedule, cfg.s_norm)
        row = {
            "t": state.t,
            "ms": ms,
            "ms_max": self._ms_max,
            "mass": mass,
            "hamiltonian": ham,
            "sigma_est": est.sigma_est,
            "sigma_usable": est.usable,
            "fit_rms": est.rms_residual,
            "us_l2": ref.us_norm(0.0),
            "us_h12": ref.us_norm(0.5),
        }
        self.times.append(state.t)
        self.rows.append(row)
        if cfg.keep_fields:
            self.fields.append({
                "eta": state.eta.coeffs, "psi": state.psi.coeffs,
                "G": dn.G.coeffs, "B": dn.B.coeffs,
                "V": tuple(c.coeffs for c in dn.V),
            })
        return row

    def series(self, key: str) -> np.ndarray:
        return np.array([r[key] for r in self.rows])

    def es_series(self) -> np.ndarray:
        K = self.schedule.K if self.schedule else 0.0
        eps = self.schedule.eps if self.schedule else 0.0
        return energy_Es(self.times, self.series("us_l2"), self.series("us_h12"),
                         K, eps)

    def csv_lines(self) -> list:
        lines = [
            f"# config {self.config_hash()}",
            "# columns: " + ",".join(CSV_COLUMNS),
            ",".join(CSV_COLUMNS),
        ]
        es = self.es_series() if self.rows else []
        for i, r in enumerate(self.rows):
            vals = [r["t"], *r["ms"], r["ms_max"], r["mass"], r["hamiltonian"],
                    r["sigma_est"], int(r["sigma_usable"]), r["fit_rms"],
                    r["us_l2"], r["us_h12"], es[i]]
            lines.append(",".join(_fmt(v) for v in vals))
        return lines


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def hamiltonian(eta: SpectralField, psi: SpectralField, dn: DNResult) -> float:
    """H = 1/2 <psi, G(eta) psi> + g/2 <eta, eta> (meaningful when b = 0)."""
    lat = eta.lattice
    vol = _TWO_PI ** lat.d
    kinetic = vol * float(np.real(np.sum(psi.coeffs * np.conj(dn.G.coeffs))))
    potential = lat.g * vol * float(np.sum(np.abs(eta.coeffs) ** 2))
    return 0.5 * kinetic + 0.5 * potential


def conservation_report(record: RunRecord, b_src) -> tuple:
    """(mass_drift, hamiltonian_relative_drift, flux_balance_residual).

    mass_drift = max_t |int eta(t) - int eta(0) - int_0^t int b|;
    the hamiltonian drift is NaN unless the source is zero."""
    lat = record.config.lattice()
    times = np.array(record.times)
    mass = record.series("mass")
    vol = _TWO_PI ** lat.d

    def mean_b(t):
        return float(np.real(b_src.b_field(lat, t).mean)) * vol

    drift = 0.0
    acc = 0.0
    fine = 64
    flux_resid = 0.0
    for i in range(len(times)):
        if i > 0:
            ts = np.linspace(times[i - 1], times[i], fine + 1)
            vals = np.array([mean_b(t) for t in ts])
            seg = float(np.trapezoid(vals, ts))
            acc += seg
            dtm = times[i] - times[i - 1]
            flux_resid = max(flux_resid,
                             abs((mass[i] - mass[i - 1]) / dtm - seg / dtm))
        drift = max(drift, abs(mass[i] - mass[0] - acc))

    ham_drift = float("nan")
    if b_src.is_zero():
        ham = record.series("hamiltonian")
        scale = max(abs(ham[0]), 1e-300)
        ham_drift = float(np.max(np.abs(ham - ham[0])) / scale)
    return drift, ham_drift, flux_resid


# ---------------------------------------------------------------------------
# evolution identity of the gradient unknown
# ---------------------------------------------------------------------------

def zeta_evolution_residual(record: RunRecord, indices=None, subsample: int = 1) -> float:
    """Along a stored run, compare the centered time difference of
    zeta = grad eta with J[ G(eta)(V, grad b) - (V.grad) zeta - (div V) zeta ],
    on the resolved band (the identity machinery is meaningless in the outer
    third of the lattice).

    Needs kept fields and one extra surface solve per checked tick; returns
    the worst relative residual over the checked interior ticks."""
    from .dn import compute_dn, resolved_band_mask
    from .spectral import coeffs_to_grid, grid_to_coeffs, mollify

    cfg = record.config
    lat = cfg.lattice()
    vg = cfg.vgrid()
    J = cfg.mollifier()
    if not record.fields:
        raise ValueError("record has no stored fields (keep_fields was off)")
    times = record.times
    if indices is None:
        indices = range(1, len(times) - 1, subsample)
    band = resolved_band_mask(lat)
    worst = 0.0
    for i in indices:
        dt_m = times[i] - times[i - 1]
        dt_p = times[i + 1] - times[i]
        if abs(dt_p - dt_m) > 1e-12 * max(dt_p, dt_m):
            continue
        eta_c = record.fields[i]["eta"]
        eta = SpectralField(lat, np.ascontiguousarray(eta_c), hermitian=True)
        V = tuple(SpectralField(lat, np.ascontiguousarray(c))
                  for c in record.fields[i]["V"])
        b_t = cfg.bottom.b_field(lat, times[i])
        worst_i = 0.0
        V_g = [coeffs_to_grid(lat, comp.coeffs).real for comp in V]
        divV = sum(coeffs_to_grid(lat, 1j * k * comp.coeffs).real
                   for k, comp in zip(lat.k_axes, V))
        for a in range(lat.d):
            zeta_now = 1j * lat.k_axes[a] * eta_c
            zeta_prev = 1j * lat.k_axes[a] * record.fields[i - 1]["eta"]
            zeta_next = 1j * lat.k_axes[a] * record.fields[i + 1]["eta"]
            lhs = (zeta_next - zeta_prev) / (dt_p + dt_m)
            db_a = SpectralField(lat, np.ascontiguousarray(1j * lat.k_axes[a] * b_t.coeffs),
                                 hermitian=b_t.hermitian)
            dn_a = compute_dn(eta, V[a], db_a, vg, tol=cfg.solver_tol)
            zeta_grad = [coeffs_to_grid(lat, 1j * k * zeta_now).real for k in lat.k_axes]
            transport = sum(vg_ * zg for vg_, zg in zip(V_g, zeta_grad))
            zeta_vals = coeffs_to_grid(lat, zeta_now).real
            rhs_vals = (coeffs_to_grid(lat, dn_a.G.coeffs).real - transport
                        - divV * zeta_vals)
            rhs_f = SpectralField(lat, grid_to_coeffs(lat, rhs_vals), hermitian=True)
            if J is not None:
                rhs_f = mollify(rhs_f, J)
            num = np.linalg.norm((lhs - rhs_f.coeffs)[band])
            den = max(np.linalg.norm(rhs_f.coeffs[band]),
                      np.linalg.norm(lhs[band]), 1e-300)
            worst_i = max(worst_i, num / den)
        worst = max(worst, worst_i)
    return worst


# ---------------------------------------------------------------------------
# the headline experiment
# ---------------------------------------------------------------------------

def analytic_seed(lattice: Lattice, sigma0: float, s: float, amp: float = 1.0):
    """Initial pair with analytic radius sigma0: coefficients
    e^{-sigma0 |xi|} <xi>^{-(s+1.5)}, the prefactor making the size norms
    converge (dominated by low modes, so amp tracks the physical amplitude).

    psi is phase-locked to eta mode by mode as a right-traveling linear wave
    (psi_hat = -i g/omega eta_hat), so the linear flow preserves |eta_hat|
    exactly and shell statistics see only the nonlinear redistribution."""
    eta_c = amp * np.exp(-sigma0 * lattice.abs_k) * lattice.bracket_k ** (-(s + 1.5))
    omega = np.sqrt(lattice.g * np.maximum(dn_symbol(lattice), 1e-300))
    sign = np.sign(lattice.k_axes[0] + 0.0)
    psi_c = np.where(lattice.abs_k > 0, -1j * sign * lattice.g / omega * eta_c, 0.0)
    eta = SpectralField(lattice, np.ascontiguousarray(eta_c, dtype=complex), hermitian=True)
    psi = SpectralField(lattice, np.ascontiguousarray(np.broadcast_to(
        psi_c, lattice.mode_shape).copy()), hermitian=True)
    return eta, psi


def calibrated_seed(config, target_eps: float, sigma0: float):
    """Scale the analytic seed so the measured size equals target_eps.

    Starts well below the target (the measured size is linear in the
    amplitude to leading order) and refines twice."""
    from .dn import compute_dn

    lat = config.lattice()
    vg = config.vgrid()
    amp = 0.2 * target_eps
    eta, psi = analytic_seed(lat, sigma0, config.s_norm, amp=amp)
    for _ in range(2):
        dn0 = compute_dn(eta, psi, config.bottom.b_field(lat, 0.0), vg,
                         tol=config.solver_tol)
        measured = measured_data_size(eta, psi, dn0, config)
        amp *= target_eps / measured
        eta, psi = analytic_seed(lat, sigma0, config.s_norm, amp=amp)
    return eta, psi


def fit_radius_decay(record: RunRecord):
    """Affine fit sigma_est(t) ~ sigma0_hat - r t over the usable ticks."""
    ts, sigs = [], []
    for t, row in zip(record.times, record.rows):
        if row["sigma_usable"]:
            ts.append(t)
            sigs.append(row["sigma_est"])
    ts, sigs = np.array(ts), np.array(sigs)
    if len(ts) < 3:
        return {"rate": float("nan"), "sigma0": float("nan"),
                "rms": float("inf"), "n_points": len(ts)}
    coef = np.polyfit(ts, sigs, 1)
    fitvals = np.polyval(coef, ts)
    return {"rate": float(-coef[0]), "sigma0": float(coef[1]),
            "rms": float(np.sqrt(np.mean((sigs - fitvals) ** 2))),
            "n_points": int(len(ts)),
            "envelope_ok": bool(np.all(
                sigs >= fitvals - 3.0 * np.sqrt(np.mean((sigs - fitvals) ** 2)) - 1e-12)),
            }


def radius_decay_experiment(base_config, eps_list, sigma0: float | None = None,
                            horizon_c: float = 1.2, max_steps: int = 10_000):
    """Run the sweep over data sizes and fit the radius decay rate of each.

    The horizon is min(horizon_c / eps, T cap from max_steps).  Returns one
    row per eps: {eps, rate, sigma0, rms, record}.
    """
    from dataclasses import replace
    from .evolution import run

    if sigma0 is None:
        sigma0 = base_config.lam * base_config.h
    rows = []
    for eps in eps_list:
        cfg = replace(base_config)
        dt = cfg.step_size()
        horizon = min(horizon_c / eps if eps > 0 else base_config.T_final,
                      max_steps * dt, base_config.T_final)
        cfg = replace(cfg, T_final=horizon, eps_schedule=eps)
        if eps > 0:
            eta0, psi0 = calibrated_seed(cfg, eps, sigma0)
        else:
            eta0, psi0 = analytic_seed(cfg.lattice(), sigma0, cfg.s_norm, amp=0.0)
        record = run(cfg, eta0, psi0)
        fit = fit_radius_decay(record)
        rows.append({"eps": eps, "stop": record.stop_reason, "record": record, **fit})
    return rows
