"""Time advancement of the two-unknown surface system.

State is (eta, psi): surface elevation and the surface trace of the velocity
potential.  The evolution is

    d_t eta = J[ G(eta)(psi, b) ],
    d_t psi = J[ -g eta - 1/2 |grad psi|^2
                 + (G(eta)(psi,b) + grad eta . grad psi)^2 / (2 (1+|grad eta|^2)) ],

with an optional frequency cutoff J at scale n making the system a
finite-dimensional ODE.  Two integrators are provided: classical RK4 with the
bottom source evaluated analytically at stage times, and an integral-equation
sweep scheme where each iterate is obtained by spectral time quadrature of
the previous iterate's right-hand side.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BlowUp, DiffeomorphismFailure, NoContraction
from .dn import DNResult, compute_dn
from .spectral import (
    Lattice,
    MollifierSpec,
    SpectralField,
    analytic_norm,
    coeffs_to_grid,
    dn_symbol,
    grid_to_coeffs,
    mollify,
)
from .strip import VerticalGrid


def _state_hash(eta: SpectralField, psi: SpectralField) -> str:
    hsh = hashlib.sha256()
    hsh.update(eta.coeffs.tobytes())
    hsh.update(psi.coeffs.tobytes())
    return hsh.hexdigest()


@dataclass
class WaveState:
    """(t, eta, psi) plus an optional cached surface solve."""

    t: float
    eta: SpectralField
    psi: SpectralField
    cache: DNResult | None = None
    _cache_key: str | None = None

    def with_cache(self, dn: DNResult) -> "WaveState":
        return replace(self, cache=dn, _cache_key=_state_hash(self.eta, self.psi))

    def cached_dn(self) -> DNResult | None:
        """The cached solve, or None when it does not match (eta, psi)."""
        if self.cache is None:
            return None
        if self._cache_key != _state_hash(self.eta, self.psi):
            return None
        return self.cache


@dataclass(frozen=True)
class BottomSource:
    """Bottom Neumann forcing: a sum of Fourier modes with smooth envelopes.

    Each entry of ``modes`` is (xi, amplitude, t0, tau, omega): the mode xi
    (and its conjugate mirror) driven by amplitude * exp(-((t-t0)/tau)^2)
    * cos(omega (t-t0)).  Evaluation is C^1 (in fact smooth) in t.
    """

    kind: str = "zero"
    modes: tuple = ()

    def __post_init__(self):
        if self.kind not in ("zero", "modal"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        if self.kind == "modal" and not self.modes:
            raise ValueError("modal source needs at least one mode")

    def is_zero(self) -> bool:
        return self.kind == "zero"

    def _assemble(self, lattice: Lattice, t: float, derivative: bool) -> SpectralField:
        c = np.zeros(lattice.mode_shape, dtype=complex)
        if self.kind == "modal":
            n = lattice.n_modes
            for xi, amp, t0, tau, omega in self.modes:
                dt = t - t0
                gauss = math.exp(-((dt / tau) ** 2))
                if derivative:
                    env = gauss * (-2.0 * dt / tau**2 * math.cos(omega * dt)
                                   - omega * math.sin(omega * dt))
                else:
                    env = gauss * math.cos(omega * dt)
                kvec = [int(k) for k in np.atleast_1d(xi)]
                idx = tuple(k % n for k in kvec)
                c[idx] += amp * env
                mirror = tuple((-k) % n for k in kvec)
                if mirror != idx:
                    c[mirror] += np.conj(amp) * env
        return SpectralField(lattice, c, hermitian=True)

    def b_field(self, lattice: Lattice, t: float) -> SpectralField:
        return self._assemble(lattice, t, derivative=False)

    def db_dt_field(self, lattice: Lattice, t: float) -> SpectralField:
        return self._assemble(lattice, t, derivative=True)


@dataclass(frozen=True)
class RadiusSchedule:
    """Predicted strip width sigma(t) = lam*h - K*eps*t."""

    lam: float
    h: float
    K: float
    eps: float

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise ValueError("lam must be in (0, 1)")

    def sigma(self, t: float) -> float:
        return self.lam * self.h - self.K * self.eps * t

    def exhaustion_time(self) -> float:
        rate = self.K * self.eps
        return math.inf if rate <= 0 else self.lam * self.h / rate


def radius_schedule_eval(sched: RadiusSchedule, t: float) -> float:
    """sigma(t); negative values signal an exhausted schedule."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return sched.sigma(t)


@dataclass
class RunConfig:
    """Everything one integration needs; parsed from config files by the CLI."""

    d: int = 1
    M: int = 32
    h: float = 1.0
    g: float = 1.0
    Nz: int = 48
    scheme: str = "rk4_mollified"          # or "picard"
    n_mollifier: int = 0                   # 0 = identity (no cutoff)
    dt: float = 0.0                        # 0 = derive from the CFL factor
    cfl: float = 0.5
    T_final: float = 10.0
    cadence: int = 10                      # record every this many steps
    lam: float = 0.5
    K_schedule: float = 0.0
    eps_schedule: float = 0.0              # 0 = measure from the data at t=0
    s_norm: float = 4.0
    radius_floor: float = 0.0              # 0 = disabled
    blowup_factor: float = 1e3
    solver_tol: float = 1e-10
    solver_max_iter: int = 50
    noise_floor: float = 1e-13
    min_shells: int = 5
    picard_nodes: int = 13
    picard_sweeps: int = 12
    picard_tol: float = 1e-12
    keep_fields: bool = True
    seed: int = 0
    out_prefix: str = "run"
    bottom: BottomSource = field(default_factory=BottomSource)

    def __post_init__(self):
        if self.T_final <= 0:
            raise ValueError("T_final must be positive")
        if self.dt < 0:
            raise ValueError("dt must be >= 0")
        if self.scheme not in ("rk4_mollified", "picard"):
            raise ValueError(f"unknown scheme {self.scheme!r}")

    def lattice(self) -> Lattice:
        return Lattice(d=self.d, M=self.M, h=self.h, g=self.g)

    def vgrid(self) -> VerticalGrid:
        return VerticalGrid(Nz=self.Nz, h=self.h)

    def mollifier(self) -> MollifierSpec | None:
        return MollifierSpec(self.n_mollifier) if self.n_mollifier > 0 else None

    def cfl_dt(self) -> float:
        lat = self.lattice()
        a_max = float(np.max(dn_symbol(lat)))
        return self.cfl / math.sqrt(self.g * a_max)

    def step_size(self) -> float:
        return self.dt if self.dt > 0 else self.cfl_dt()


def _mollify_opt(u: SpectralField, J: MollifierSpec | None) -> SpectralField:
    return u if J is None else mollify(u, J)


def rhs(state: WaveState, b_src: BottomSource, J: MollifierSpec | None,
        vgrid: VerticalGrid, tol: float = 1e-10, max_iter: int = 50,
        w0=None, reformulated: bool = False):
    """Right-hand side (d_t eta, d_t psi) and the surface solve behind it.

    reformulated=True evaluates the psi equation through the velocity traces,
        d_t psi = J[-g eta - 1/2 |V + B zeta|^2 + 1/2 (1+|zeta|^2) B^2],
    which must agree with the quotient form; the quotient form is what the
    integrator uses.
    """
    lat = state.eta.lattice
    b_t = b_src.b_field(lat, state.t)
    dn = compute_dn(state.eta, state.psi, b_t, vgrid, tol=tol,
                    max_iter=max_iter, w0=w0)
    g = lat.g
    gv = dn._grids
    eta_vals = gv["eta"]
    G_vals, geta, gpsi = gv["G"], gv["geta"], gv["gpsi"]
    zsq = sum(z * z for z in geta)
    if reformulated:
        B_vals, V_vals = dn._b_vals(), dn._v_vals()
        flow_sq = sum((v + B_vals * z) ** 2 for v, z in zip(V_vals, geta))
        dpsi_vals = -g * eta_vals - 0.5 * flow_sq + 0.5 * (1.0 + zsq) * B_vals**2
    else:
        N_vals = G_vals + sum(z * p for z, p in zip(geta, gpsi))
        dpsi_vals = (-g * eta_vals - 0.5 * sum(p * p for p in gpsi)
                     + N_vals**2 / (2.0 * (1.0 + zsq)))
    deta = _mollify_opt(dn.G, J)
    dpsi = _mollify_opt(
        SpectralField(lat, grid_to_coeffs(lat, dpsi_vals), hermitian=True), J)
    return deta, dpsi, dn


def step_rk4(state: WaveState, dt: float, b_src: BottomSource,
             J: MollifierSpec | None, vgrid: VerticalGrid,
             tol: float = 1e-10, max_iter: int = 50, cfl_warn: bool = True):
    """One classical fourth-order step; the source is evaluated at stage times.

    Returns (new_state, dn_at_start); raises BlowUp on non-finite output.
    """
    lat = state.eta.lattice
    if cfl_warn:
        a_max = float(np.max(dn_symbol(lat)))
        dt_max = 2.8 / math.sqrt(lat.g * a_max)
        if abs(dt) > dt_max:
            warnings.warn(f"dt={dt:g} exceeds the linear stability bound {dt_max:g}",
                          RuntimeWarning, stacklevel=2)

    def at(t, eta_c, psi_c, w0=None):
        s = WaveState(t,
                      SpectralField(lat, np.ascontiguousarray(eta_c), hermitian=True),
                      SpectralField(lat, np.ascontiguousarray(psi_c), hermitian=True))
        de, dp, dn = rhs(s, b_src, J, vgrid, tol=tol, max_iter=max_iter, w0=w0)
        return de.coeffs, dp.coeffs, dn

    # stages start the elliptic fixed point cold: in the smooth regime the
    # flat solve is a better initial guess than the previous stage's solution
    t, e0, p0 = state.t, state.eta.coeffs, state.psi.coeffs
    k1e, k1p, dn0 = at(t, e0, p0)
    k2e, k2p, _ = at(t + dt / 2, e0 + dt / 2 * k1e, p0 + dt / 2 * k1p)
    k3e, k3p, _ = at(t + dt / 2, e0 + dt / 2 * k2e, p0 + dt / 2 * k2p)
    k4e, k4p, _ = at(t + dt, e0 + dt * k3e, p0 + dt * k3p)
    enew = e0 + dt / 6.0 * (k1e + 2 * k2e + 2 * k3e + k4e)
    pnew = p0 + dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
    if not (np.all(np.isfinite(enew)) and np.all(np.isfinite(pnew))):
        raise BlowUp(f"non-finite state after step at t={t:g}")
    new = WaveState(t + dt,
                    SpectralField(lat, np.ascontiguousarray(enew), hermitian=True),
                    SpectralField(lat, np.ascontiguousarray(pnew), hermitian=True))
    return new, dn0


def run(config: RunConfig, eta0: SpectralField, psi0: SpectralField):
    """Integrate to T_final, recording diagnostics at the configured cadence.

    Stops early (with the reason recorded, never a silent NaN) on: the norm
    ceiling (blowup_factor x the initial size), a failed geometry or elliptic
    solve, or the estimated radius crossing the configured floor.
    """
    from . import diagnostics as diag

    lat = config.lattice()
    vg = config.vgrid()
    J = config.mollifier()
    if not (eta0.hermitian and psi0.hermitian):
        raise ValueError("initial data must be hermitian")
    if J is not None:
        eta0, psi0 = mollify(eta0, J), mollify(psi0, J)

    dt = config.step_size()
    n_steps = max(1, math.ceil(config.T_final / dt - 1e-12))
    dt = config.T_final / n_steps

    record = diag.RunRecord(config=config, dt=dt)
    state = WaveState(0.0, eta0, psi0)

    # measured data size and the radius schedule built from it
    b0 = config.bottom.b_field(lat, 0.0)
    try:
        dn0 = compute_dn(eta0, psi0, b0, vg, tol=config.solver_tol,
                         max_iter=config.solver_max_iter)
    except (DiffeomorphismFailure, NoContraction) as exc:
        record.stop_reason = type(exc).__name__
        record.stop_detail = str(exc)
        return record
    eps = config.eps_schedule
    if eps <= 0:
        eps = diag.measured_data_size(eta0, psi0, dn0, config)
    sched = RadiusSchedule(lam=config.lam, h=config.h, K=config.K_schedule, eps=eps)
    record.schedule = sched

    ms0 = diag.norms_snapshot(state, dn0, sched, config.s_norm)
    ceiling = config.blowup_factor * max(sum(ms0), eps, 1e-8)
    record.append(state, dn0)

    for step in range(1, n_steps + 1):
        try:
            state, dn_prev = step_rk4(state, dt, config.bottom, J, vg,
                                      tol=config.solver_tol,
                                      max_iter=config.solver_max_iter,
                                      cfl_warn=(step == 1))
            state = state.with_cache(dn_prev)   # dn_prev solved at the pre-step state
        except (DiffeomorphismFailure, NoContraction, BlowUp) as exc:
            record.stop_reason = type(exc).__name__
            record.stop_detail = str(exc)
            return record
        if step % config.cadence == 0 or step == n_steps:
            b_t = config.bottom.b_field(lat, state.t)
            try:
                dn = compute_dn(state.eta, state.psi, b_t, vg, tol=config.solver_tol,
                                max_iter=config.solver_max_iter)
            except (DiffeomorphismFailure, NoContraction) as exc:
                record.stop_reason = type(exc).__name__
                record.stop_detail = str(exc)
                return record
            state = WaveState(state.t, state.eta, state.psi).with_cache(dn)
            row = record.append(state, dn)
            if sum(row["ms"]) > ceiling:
                record.stop_reason = "BlowUp"
                record.stop_detail = f"norm ceiling {ceiling:g} exceeded at t={state.t:g}"
                return record
            if (config.radius_floor > 0 and row["sigma_usable"]
                    and row["sigma_est"] < config.radius_floor):
                record.stop_reason = "RadiusFloor"
                record.stop_detail = (f"sigma_est={row['sigma_est']:.4g} below floor "
                                      f"{config.radius_floor:g} at t={state.t:g}")
                return record
    record.stop_reason = "completed"
    return record


# ---------------------------------------------------------------------------
# integral-equation sweeps
# ---------------------------------------------------------------------------

def save_checkpoint(path, state: WaveState, config_hash: str = "") -> None:
    """Restartable snapshot: a JSON header line (t, config hash) then the two
    field blocks in the spectral text format (bit-exact round trip)."""
    import json as _json
    from .spectral import snapshot_lines

    parts = [_json.dumps({"t": f"{state.t:.17g}", "config": config_hash})]
    for name, fld in (("eta", state.eta), ("psi", state.psi)):
        parts.append(f"== field {name}")
        parts.extend(snapshot_lines(fld))
    with open(path, "w") as f:
        f.write("\n".join(parts) + "\n")


def load_checkpoint(path):
    """Inverse of save_checkpoint; returns (WaveState, config_hash)."""
    import json as _json
    from .spectral import parse_snapshot_lines

    lines = open(path).read().splitlines()
    header = _json.loads(lines[0])
    blocks: dict = {}
    name = None
    acc: list = []
    for line in lines[1:]:
        if line.startswith("== field "):
            if name is not None:
                blocks[name] = acc
            name = line.split()[-1]
            acc = []
        elif line.strip():
            acc.append(line)
    if name is not None:
        blocks[name] = acc
    eta = parse_snapshot_lines(blocks["eta"])
    psi = parse_snapshot_lines(blocks["psi"])
    return WaveState(float(header["t"]), eta, psi), header.get("config", "")


# ---------------------------------------------------------------------------
# integral-equation sweeps
# ---------------------------------------------------------------------------

def _cgl_times(n: int, T: float) -> np.ndarray:
    """Chebyshev-Gauss-Lobatto nodes mapped increasing onto [0, T]."""
    return T * (1.0 - np.cos(np.pi * np.arange(n) / (n - 1))) / 2.0


def _cumulative_integration_matrix(n: int, T: float) -> np.ndarray:
    """Q such that (Q f)(t_i) = integral_0^{t_i} f, exact for the CGL interpolant."""
    theta = -np.cos(np.pi * np.arange(n) / (n - 1))     # increasing on [-1, 1]
    Q = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        coef = np.polynomial.chebyshev.chebfit(theta, e, n - 1)
        anti = np.polynomial.chebyshev.chebint(coef)
        vals = np.polynomial.chebyshev.chebval(theta, anti)
        Q[:, j] = (vals - vals[0]) * (T / 2.0)
    return Q


@dataclass
class PicardResult:
    times: np.ndarray
    eta_path: np.ndarray       # (sweeps kept only for the final path)
    psi_path: np.ndarray
    diff_norms: list
    ratios: list
    m_nu_history: list
    sweeps: int
    converged: bool


def picard_solve(eta0: SpectralField, psi0: SpectralField, b_src: BottomSource,
                 T: float, n_time_nodes: int, max_sweeps: int, tol: float,
                 vgrid: VerticalGrid, s_norm: float = 4.0, lam: float = 0.5,
                 K: float | None = None, solver_tol: float = 1e-11) -> PicardResult:
    """Sweep scheme: each iterate integrates the previous iterate's rhs,

        eta_{v+1}(t) = eta_0 + int_0^t G(eta_v)(psi_v, b),
        psi_{v+1}(t) = psi_0 + int_0^t [-g eta_v - ...],

    sampled at CGL times and integrated by the spectral cumulative rule.
    Returns per-sweep sup-in-time difference norms and their ratios; raises
    NoContraction when the ratios never fall below 0.9.
    """
    lat = eta0.lattice
    times = _cgl_times(n_time_nodes, T)
    Q = _cumulative_integration_matrix(n_time_nodes, T)
    if K is None:
        K = 0.5 * lam * lat.h / T          # keeps sigma(t) >= lam h / 2 on [0, T]

    eta_path = np.tile(eta0.coeffs, (n_time_nodes,) + (1,) * lat.d)
    psi_path = np.tile(psi0.coeffs, (n_time_nodes,) + (1,) * lat.d)
    diff_norms: list = []
    ratios: list = []
    m_nu_history: list = []
    converged = False
    sweep = 0
    for sweep in range(1, max_sweeps + 1):
        F = np.empty_like(eta_path)
        G2 = np.empty_like(psi_path)
        warm = None
        for i, t in enumerate(times):
            st = WaveState(
                t,
                SpectralField(lat, np.ascontiguousarray(eta_path[i]), hermitian=True),
                SpectralField(lat, np.ascontiguousarray(psi_path[i]), hermitian=True))
            de, dp, dn = rhs(st, b_src, None, vgrid, tol=solver_tol, w0=warm)
            warm = dn.phi_strip
            F[i] = de.coeffs
            G2[i] = dp.coeffs
        new_eta = eta0.coeffs[None] + np.tensordot(Q, F, axes=(1, 0))
        new_psi = psi0.coeffs[None] + np.tensordot(Q, G2, axes=(1, 0))

        diff = 0.0
        for i in range(n_time_nodes):
            de = SpectralField(lat, np.ascontiguousarray(new_eta[i] - eta_path[i]))
            dp = SpectralField(lat, np.ascontiguousarray(new_psi[i] - psi_path[i]))
            diff = max(diff, analytic_norm(de, (0.0, s_norm))
                       + analytic_norm(dp, (0.0, s_norm)))
        eta_path, psi_path = new_eta, new_psi
        diff_norms.append(diff)
        if len(diff_norms) >= 2 and diff_norms[-2] > 0:
            ratios.append(diff_norms[-1] / diff_norms[-2])
        m_nu_history.append(_m_nu(lat, times, eta_path, psi_path, Q, lam, K, s_norm))
        if diff < tol:
            converged = True
            break
    if not converged and (not ratios or min(ratios) >= 0.9):
        raise NoContraction(
            f"sweep differences did not contract below 0.9 within {sweep} sweeps")
    return PicardResult(times=times, eta_path=eta_path, psi_path=psi_path,
                        diff_norms=diff_norms, ratios=ratios,
                        m_nu_history=m_nu_history, sweeps=sweep, converged=converged)


def _m_nu(lat, times, eta_path, psi_path, Q, lam, K, s):
    """Sweep energy: weighted norms at sigma(t) = lam h - K t plus the
    K-weighted time integral of the half-order-smoother norms."""
    n = len(times)
    sq_low = np.empty(n)
    sq_high = np.empty(n)
    for i, t in enumerate(times):
        sig = max(lam * lat.h - K * t, 0.0)
        e = SpectralField(lat, np.ascontiguousarray(eta_path[i]))
        p = SpectralField(lat, np.ascontiguousarray(psi_path[i]))
        sq_low[i] = analytic_norm(e, (sig, s)) ** 2 + analytic_norm(p, (sig, s)) ** 2
        sq_high[i] = (analytic_norm(e, (sig, s + 0.5)) ** 2
                      + analytic_norm(p, (sig, s + 0.5)) ** 2)
    integral = Q @ sq_high
    return sq_low + 2.0 * K * integral
