"""The Dirichlet-Neumann operator with bottom forcing, surface velocities,
and numerical checks of its exact differentiation identities.

Surface data psi (Dirichlet) and bottom data b (Neumann) determine a
potential in the fluid; the operator returns the scaled normal derivative at
the free surface.  In straightened coordinates:

    G(eta)(psi, b) = [ (1+|grad rho|^2)/(d_z rho) d_z u - grad rho . grad u ]|_{z=0},

where u solves (Lap + R) u = 0 with u|_{z=0} = psi and
d_z u|_{z=-h} = (d_z rho|_{z=-h}) b.  The surface velocity traces follow
algebraically:

    B = (G + grad eta . grad psi) / (1 + |grad eta|^2),   V = grad psi - B grad eta.

Rational factors are evaluated by pointwise division on the dealiased grid.
Identity checks are restricted to the resolved band |xi| <= 2M/3 (the outer
third carries truncation artifacts).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import (
    Lattice,
    SpectralField,
    analytic_norm,
    apply_multiplier,
    coeffs_to_grid,
    dn_symbol,
    grid_to_coeffs,
    is_hermitian,
    hs_norm,
)
from .strip import (
    StripField,
    SurfaceGeometry,
    VerticalGrid,
    build_geometry,
    solve_elliptic,
    zero_strip,
)


class DNResult:
    """Outputs of one Dirichlet-Neumann solve.

    The velocity traces are assembled lazily from cached pointwise values:

        B = (G + grad eta . grad psi)/(1+|grad eta|^2),   V = grad psi - B grad eta.
    """

    def __init__(self, G, phi_strip, phi_h, lap_phi_h, grids, solve_info=None):
        self.G = G
        self.phi_strip = phi_strip
        self.phi_h = phi_h
        self.lap_phi_h = lap_phi_h
        self.solve_info = solve_info
        self._grids = grids

    def _b_vals(self) -> np.ndarray:
        gv = self._grids
        if "B" not in gv:
            denom = 1.0 + sum(gg ** 2 for gg in gv["geta"])
            gv["B"] = (gv["G"] + sum(ge * gp for ge, gp
                                     in zip(gv["geta"], gv["gpsi"]))) / denom
        return gv["B"]

    def _v_vals(self) -> list:
        gv = self._grids
        if "V" not in gv:
            B = self._b_vals()
            gv["V"] = [gp - B * ge for gp, ge in zip(gv["gpsi"], gv["geta"])]
        return gv["V"]

    @property
    def B(self) -> SpectralField:
        if "B_field" not in self._grids:
            self._grids["B_field"] = _field(self.G.lattice, self._b_vals())
        return self._grids["B_field"]

    @property
    def V(self) -> tuple:
        if "V_fields" not in self._grids:
            self._grids["V_fields"] = tuple(
                _field(self.G.lattice, v) for v in self._v_vals())
        return self._grids["V_fields"]

    def velocity_sq(self) -> SpectralField:
        """|V|^2 + B^2, the squared velocity trace (dealiased)."""
        acc = self._b_vals() ** 2
        for comp in self._v_vals():
            acc = acc + comp ** 2
        return _field(self.G.lattice, acc)


def _grid(u: SpectralField) -> np.ndarray:
    vals = coeffs_to_grid(u.lattice, u.coeffs)
    return vals.real if u.hermitian else vals


def _field(lat: Lattice, values: np.ndarray) -> SpectralField:
    c = grid_to_coeffs(lat, values)
    return SpectralField(lat, c, hermitian=bool(np.isrealobj(values)))


def _grad_grids(u: SpectralField) -> list:
    lat = u.lattice
    out = []
    for k in lat.k_axes:
        vals = coeffs_to_grid(lat, 1j * k * u.coeffs)
        out.append(vals.real if u.hermitian else vals)
    return out


def compute_dn(eta: SpectralField, psi: SpectralField, b: SpectralField,
               vgrid: VerticalGrid, tol: float = 1e-10, max_iter: int = 50,
               geom: SurfaceGeometry | None = None,
               w0: StripField | None = None) -> DNResult:
    """Solve for the potential and assemble (G, B, V) plus bottom traces.

    An already-built geometry for the same eta can be passed in to avoid
    rebuilding it; w0 warm-starts the elliptic fixed point.
    """
    lat = eta.lattice
    if geom is None:
        geom = build_geometry(eta, vgrid)
    if np.any(b.coeffs):
        theta = _field(lat, _grid(geom.dz_rho_bottom) * _grid(b))
    else:
        theta = SpectralField(lat, np.zeros(lat.mode_shape, dtype=complex), hermitian=True)
    sol = solve_elliptic(geom, zero_strip(lat, vgrid), psi, theta,
                         tol=tol, max_iter=max_iter, w0=w0)
    u = sol.w

    uz0 = np.tensordot(vgrid.D[0, :].astype(complex), u.coeffs, axes=(0, 0))
    batch = np.stack([uz0, *(1j * k * u.coeffs[0] for k in lat.k_axes),
                      *(1j * k * eta.coeffs for k in lat.k_axes),
                      *(1j * k * psi.coeffs for k in lat.k_axes),
                      eta.coeffs])
    g = coeffs_to_grid(lat, batch).real
    d = lat.d
    G_vals = geom._phys["alpha"][0] * g[0]
    for a in range(d):
        G_vals = G_vals - geom._phys["gr"][a][0] * g[1 + a]
    G = _field(lat, G_vals)
    grids = {"G": G_vals,
             "geta": [g[1 + d + a].copy() for a in range(d)],
             "gpsi": [g[1 + 2 * d + a].copy() for a in range(d)],
             "eta": g[1 + 3 * d].copy()}

    phi_h_c = np.ascontiguousarray(u.coeffs[-1])
    phi_h = SpectralField(lat, phi_h_c, hermitian=is_hermitian(phi_h_c, lat.d, tol=1e-12))
    lap_phi_h = apply_multiplier(-lat.ksq, phi_h)
    return DNResult(G=G, phi_strip=u, phi_h=phi_h, lap_phi_h=lap_phi_h,
                    grids=grids, solve_info=sol)


def resolved_band_mask(lattice: Lattice) -> np.ndarray:
    """Inner two-thirds of the retained wavenumbers."""
    return lattice.abs_k <= (2.0 * lattice.M) / 3.0


def _band_norm(u: SpectralField) -> float:
    return float(np.linalg.norm(u.coeffs[resolved_band_mask(u.lattice)]))


def check_gradient_identity(eta: SpectralField, psi: SpectralField, b: SpectralField,
                            vgrid: VerticalGrid, tol: float = 1e-10,
                            dn: DNResult | None = None,
                            geom: SurfaceGeometry | None = None) -> float:
    """Relative residual (resolved band) of the exact differentiation identity

        grad G(eta)(psi, b) = G(eta)(V, grad b) - (V.grad) grad eta
                              - (div V) grad eta,

    which costs one extra solve per horizontal direction (Dirichlet data V_i,
    Neumann data d_i b) on the same geometry.
    """
    lat = eta.lattice
    if geom is None:
        geom = build_geometry(eta, vgrid)
    if dn is None:
        dn = compute_dn(eta, psi, b, vgrid, tol=tol, geom=geom)
    geta_c = [1j * k * eta.coeffs for k in lat.k_axes]
    geta_g = [coeffs_to_grid(lat, c).real for c in geta_c]
    divV = sum(coeffs_to_grid(lat, 1j * k * comp.coeffs).real
               for k, comp in zip(lat.k_axes, dn.V))
    V_g = [_grid(comp) for comp in dn.V]

    num2 = 0.0
    den2 = 0.0
    for i in range(lat.d):
        lhs = SpectralField(lat, np.ascontiguousarray(1j * lat.k_axes[i] * dn.G.coeffs))
        db_i = SpectralField(lat, np.ascontiguousarray(1j * lat.k_axes[i] * b.coeffs),
                             hermitian=b.hermitian)
        dn_i = compute_dn(eta, dn.V[i], db_i, vgrid, tol=tol, geom=geom)
        zeta_i_grad = [coeffs_to_grid(lat, 1j * k * geta_c[i]).real for k in lat.k_axes]
        transport = sum(vg * zg for vg, zg in zip(V_g, zeta_i_grad))
        rhs = _field(lat, _grid(dn_i.G) - transport - divV * geta_g[i])
        num2 += _band_norm(lhs - rhs) ** 2
        den2 += _band_norm(lhs) ** 2
    if den2 == 0.0:
        return 0.0 if num2 == 0.0 else float(np.sqrt(num2))
    return float(np.sqrt(num2 / den2))


def check_divV_identity(eta: SpectralField, psi: SpectralField, b: SpectralField,
                        vgrid: VerticalGrid, tol: float = 1e-10,
                        dn: DNResult | None = None,
                        geom: SurfaceGeometry | None = None) -> float:
    """Relative residual (resolved band) of

        G(eta)(B, -Lap_x phi|_{y=-h}) = -div V,

    evaluated with a second solve that reuses the geometry."""
    lat = eta.lattice
    if geom is None:
        geom = build_geometry(eta, vgrid)
    if dn is None:
        dn = compute_dn(eta, psi, b, vgrid, tol=tol, geom=geom)
    second = compute_dn(eta, dn.B, -1.0 * dn.lap_phi_h, vgrid, tol=tol, geom=geom)
    divV_c = None
    for k, comp in zip(lat.k_axes, dn.V):
        term = 1j * k * comp.coeffs
        divV_c = term if divV_c is None else divV_c + term
    divV_field = SpectralField(lat, np.ascontiguousarray(divV_c))
    resid = second.G + divV_field
    den = _band_norm(divV_field)
    if den == 0.0:
        return 0.0 if _band_norm(resid) == 0.0 else _band_norm(resid)
    return _band_norm(resid) / den


def surface_second_derivatives(eta: SpectralField, B: SpectralField, V: tuple):
    """Closed formulas for the surface traces of the second derivatives:

        d_y grad phi|_{y=eta} = grad B - [(grad B . zeta) - div V] zeta / (1+|zeta|^2),
        d_y^2 phi|_{y=eta}    = [grad B . zeta - div V] / (1+|zeta|^2),

    with zeta = grad eta; rational factors by pointwise grid division."""
    lat = eta.lattice
    zeta = _grad_grids(eta)
    gB = _grad_grids(B)
    divV = sum(coeffs_to_grid(lat, 1j * k * comp.coeffs).real
               for k, comp in zip(lat.k_axes, V))
    denom = 1.0 + sum(z ** 2 for z in zeta)
    gB_dot_zeta = sum(g * z for g, z in zip(gB, zeta))
    dy2 = (gB_dot_zeta - divV) / denom
    dygrad = tuple(_field(lat, gB[i] - (gB_dot_zeta - divV) * zeta[i] / denom)
                   for i in range(lat.d))
    return dygrad, _field(lat, dy2)


def dn_lipschitz_probe(eta1: SpectralField, eta2: SpectralField, psi: SpectralField,
                       b: SpectralField, vgrid: VerticalGrid, lam: float = 0.5,
                       s: float = 4.0, tol: float = 1e-10):
    """Difference norm ||G(eta1)(psi,b) - G(eta2)(psi,b)||_{H^{lam h, s-1/2}}
    together with the three right-hand-side norm factors of the Lipschitz
    bound (reported, not asserted against a constant)."""
    lat = eta1.lattice
    lh = lam * lat.h
    dn1 = compute_dn(eta1, psi, b, vgrid, tol=tol)
    dn2 = compute_dn(eta2, psi, b, vgrid, tol=tol)
    diff_norm = analytic_norm(dn1.G - dn2.G, (lh, s - 0.5))

    apsi = apply_multiplier(np.sqrt(dn_symbol(lat)), psi)
    # both surfaces share one psi, so the pair norms are twice the single norms
    apsi_s = 2.0 * analytic_norm(apsi, (lh, s))
    apsi_smez = 2.0 * analytic_norm(apsi, (lh, s - 0.5))
    apsi_sm1 = 2.0 * analytic_norm(apsi, (lh, s - 1.0))
    eta_pair = analytic_norm(eta1, (lh, s + 0.5)) + analytic_norm(eta2, (lh, s + 0.5))
    lam1 = eta_pair * (apsi_smez + hs_norm(b, s - 1.5)) + apsi_s + hs_norm(b, s - 0.5)
    lam2 = apsi_sm1 + hs_norm(b, s - 1.5)
    lam3 = eta_pair
    return diff_norm, {"lambda1": lam1, "lambda2": lam2, "lambda3": lam3}
