"""Manufactured solutions with closed-form derived sources."""

import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial import Polynomial

from staggered_dg.exceptions import ConfigError
from staggered_dg.mesh.primal import CellKind, PrimalMesh, Rectangle, ladder_primal
from staggered_dg.models.params import BoundaryData, FlowParams, TransportParams

logger = logging.getLogger(__name__)

MANUFACTURED_CASES = ("ex1", "ex2")
SELF_CHECK_POINTS = 200
SELF_CHECK_TOL = 1e-6
INTERFACE_TOL = 1e-12
FD_STEP = 1e-3
LIFTING_BUBBLE = 16.0

ScalarField = Callable[[np.ndarray], np.ndarray]
VectorField = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Wave:
    """poly(x) · sin(omega x + phase); the default phase makes it a plain polynomial."""

    poly: Polynomial
    omega: float = 0.0
    phase: float = np.pi / 2

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.poly(x) * np.sin(self.omega * x + self.phase)

    def deriv(self) -> tuple["Wave", ...]:
        terms = (Wave(self.poly.deriv(), self.omega, self.phase),)
        if self.omega:
            terms += (Wave(self.poly * self.omega, self.omega, self.phase + np.pi / 2),)
        return terms


@dataclass(frozen=True)
class Factor:
    """A one-variable factor: a sum of waves."""

    waves: tuple[Wave, ...]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return sum((w(x) for w in self.waves), np.zeros_like(x, dtype=float))

    def deriv(self) -> "Factor":
        return Factor(tuple(t for w in self.waves for t in w.deriv()))


def poly(*coefficients: float) -> Factor:
    """Polynomial factor from ascending coefficients."""
    return Factor((Wave(Polynomial(coefficients)),))


def product(*factors: Polynomial) -> Polynomial:
    result = Polynomial([1.0])
    for f in factors:
        result = result * f
    return result


def sine(omega: float, amplitude: Polynomial | None = None) -> Factor:
    """amplitude(x) · sin(omega x)."""
    return Factor((Wave(amplitude if amplitude is not None else Polynomial([1.0]), omega, 0.0),))


def cosine(omega: float, amplitude: Polynomial | None = None) -> Factor:
    """amplitude(x) · cos(omega x)."""
    return Factor((Wave(amplitude if amplitude is not None else Polynomial([1.0]), omega),))


def sine_squared(omega: float, amplitude: Polynomial) -> Factor:
    """amplitude(x) · sin²(omega x) = amplitude/2 − amplitude/2 · cos(2 omega x)."""
    return Factor((Wave(amplitude * 0.5), Wave(amplitude * -0.5, 2.0 * omega)))


@dataclass(frozen=True)
class Separable:
    """Σ a X(x) Y(y) over separable terms."""

    terms: tuple[tuple[float, Factor, Factor], ...]

    def __call__(self, points: np.ndarray) -> np.ndarray:
        x, y = points[..., 0], points[..., 1]
        return sum((a * fx(x) * fy(y) for a, fx, fy in self.terms), np.zeros(x.shape))

    def dx(self) -> "Separable":
        return Separable(tuple((a, fx.deriv(), fy) for a, fx, fy in self.terms))

    def dy(self) -> "Separable":
        return Separable(tuple((a, fx, fy.deriv()) for a, fx, fy in self.terms))

    def laplacian(self) -> "Separable":
        return self.dx().dx() + self.dy().dy()

    def __add__(self, other: "Separable") -> "Separable":
        return Separable(self.terms + other.terms)

    def scaled(self, factor: float) -> "Separable":
        return Separable(tuple((factor * a, fx, fy) for a, fx, fy in self.terms))


def separable(fx: Factor, fy: Factor, coefficient: float = 1.0) -> Separable:
    return Separable(((coefficient, fx, fy),))


Vector = tuple[Separable, Separable]


def _stack(*values: np.ndarray) -> np.ndarray:
    return np.stack(values, axis=-1)


def _inside(domain: Rectangle, points: np.ndarray) -> np.ndarray:
    x, y = points[..., 0], points[..., 1]
    return (x >= domain.x0) & (x <= domain.x1) & (y >= domain.y0) & (y <= domain.y1)


@dataclass(frozen=True)
class ManufacturedCase:
    """Exact flow and transport fields of a verification case.

    The concentration is c(x, t) = t · C(x) with C held in ``spatial_c``. Sources are
    derived from the exact fields: f_B = −εΔu_B + αu_B + ∇p_B, g_B = ∇·u_B,
    f_D = u_D + K_D∇p_D, f = ∇·u_D and s = c_t + ∇·(cu) − KΔc with φ = 1.
    """

    case_id: str
    domain_b: Rectangle
    domain_d: Rectangle
    u_b: Vector
    p_b: Separable
    u_d: Vector
    p_d: Separable
    spatial_c: Separable
    epsilon: float = 1.0
    alpha: float = 1.0
    k_darcy: float = 1.0
    k_diff: float = 1.0
    residuals: dict[str, float] = field(default_factory=dict, compare=False)

    # -- derivatives --------------------------------------------------------------

    @cached_property
    def _grad_b(self) -> tuple[Vector, Vector]:
        return ((self.u_b[0].dx(), self.u_b[0].dy()), (self.u_b[1].dx(), self.u_b[1].dy()))

    @cached_property
    def _lap_b(self) -> Vector:
        return (self.u_b[0].laplacian(), self.u_b[1].laplacian())

    @cached_property
    def _grad_pb(self) -> Vector:
        return (self.p_b.dx(), self.p_b.dy())

    @cached_property
    def _grad_pd(self) -> Vector:
        return (self.p_d.dx(), self.p_d.dy())

    @cached_property
    def _div_d(self) -> Separable:
        return self.u_d[0].dx() + self.u_d[1].dy()

    @cached_property
    def _grad_c(self) -> Vector:
        return (self.spatial_c.dx(), self.spatial_c.dy())

    @cached_property
    def _lap_c(self) -> Separable:
        return self.spatial_c.laplacian()

    @cached_property
    def _bubble(self) -> Separable:
        """Cubic-order boundary bubble on Ω_B."""
        b = self.domain_b
        fx = Factor((Wave(product((X - b.x0) ** 3, (b.x1 - X) ** 3)),))
        fy = Factor((Wave(product((X - b.y0) ** 3, (b.y1 - X) ** 3)),))
        return separable(fx, fy, LIFTING_BUBBLE)

    # -- exact fields -------------------------------------------------------------

    def velocity_b(self, x: np.ndarray) -> np.ndarray:
        return _stack(self.u_b[0](x), self.u_b[1](x))

    def gradient_b(self, x: np.ndarray) -> np.ndarray:
        """∇u_B row-major: (∂x u1, ∂y u1, ∂x u2, ∂y u2)."""
        (a, b), (c, d) = self._grad_b
        return _stack(a(x), b(x), c(x), d(x))

    def l_exact(self, x: np.ndarray) -> np.ndarray:
        """L = ε∇u_B, row-major."""
        return self.epsilon * self.gradient_b(x)

    def pressure_b(self, x: np.ndarray) -> np.ndarray:
        return self.p_b(x)

    def velocity_d(self, x: np.ndarray) -> np.ndarray:
        return _stack(self.u_d[0](x), self.u_d[1](x))

    def pressure_d(self, x: np.ndarray) -> np.ndarray:
        return self.p_d(x)

    def velocity(self, x: np.ndarray) -> np.ndarray:
        """u over Ω: u_B on the closed Brinkman rectangle, u_D elsewhere."""
        brinkman = _inside(self.domain_b, x)
        return np.where(brinkman[..., None], self.velocity_b(x), self.velocity_d(x))

    def divergence(self, x: np.ndarray) -> np.ndarray:
        brinkman = _inside(self.domain_b, x)
        return np.where(brinkman, self.g_brinkman(x), self.f_source(x))

    def concentration(self, x: np.ndarray, t: float) -> np.ndarray:
        return t * self.spatial_c(x)

    def flux(self, x: np.ndarray, t: float) -> np.ndarray:
        """z = −K∇c."""
        gx, gy = self._grad_c
        return -self.k_diff * t * _stack(gx(x), gy(x))

    # -- derived sources ----------------------------------------------------------

    def f_brinkman(self, x: np.ndarray) -> np.ndarray:
        lap = self._lap_b
        grad_p = self._grad_pb
        return _stack(
            *(
                -self.epsilon * lap[i](x) + self.alpha * self.u_b[i](x) + grad_p[i](x)
                for i in range(2)
            )
        )

    def g_brinkman(self, x: np.ndarray) -> np.ndarray:
        (a, _), (_, d) = self._grad_b
        return a(x) + d(x)

    def brinkman_lifting(self, x: np.ndarray) -> np.ndarray:
        """w = u_B + curl β: ∇·w = g_B, w matches u_B to first order on ∂Ω_B only."""
        bubble = self._bubble
        return self.velocity_b(x) + _stack(bubble.dy()(x), -bubble.dx()(x))

    def f_darcy(self, x: np.ndarray) -> np.ndarray:
        grad_p = self._grad_pd
        return _stack(*(self.u_d[i](x) + self.k_darcy * grad_p[i](x) for i in range(2)))

    def f_source(self, x: np.ndarray) -> np.ndarray:
        return self._div_d(x)

    def source(self, x: np.ndarray, t: float) -> np.ndarray:
        gx, gy = self._grad_c
        u = self.velocity(x)
        transport = gx(x) * u[..., 0] + gy(x) * u[..., 1] + self.spatial_c(x) * self.divergence(x)
        return self.spatial_c(x) + t * transport - self.k_diff * t * self._lap_c(x)

    # -- boundary data ------------------------------------------------------------

    def g1(self, x: np.ndarray, normals: np.ndarray) -> np.ndarray:
        return np.einsum("nd,nd->n", self.velocity_b(x), normals)

    def g2(self, x: np.ndarray, normals: np.ndarray) -> np.ndarray:
        return np.einsum("nd,nd->n", self.velocity_d(x), normals)

    def c_in(self, x: np.ndarray, t: float) -> np.ndarray:
        return self.concentration(x, t)

    # -- run inputs ---------------------------------------------------------------

    def flow_params(self) -> FlowParams:
        return FlowParams(
            epsilon=self.epsilon,
            alpha=self.alpha,
            k_darcy=self.k_darcy,
            f_brinkman=self.f_brinkman,
            f_darcy=self.f_darcy,
            f_source=self.f_source,
            g_brinkman=self.g_brinkman,
            brinkman_lifting=self.brinkman_lifting,
        )

    def boundary_data(self) -> BoundaryData:
        return BoundaryData(g1=self.g1, g2=self.g2, c_in=self.c_in)

    def transport_params(self, dt: float, t_final: float) -> TransportParams:
        return TransportParams(
            k_diff=self.k_diff,
            porosity=1.0,
            source=self.source,
            c_initial=lambda x: self.concentration(x, 0.0),
            dt=dt,
            t_final=t_final,
        )

    def primal(self, inverse_h: int, cell_kind: CellKind = CellKind.QUAD) -> PrimalMesh:
        """Rectangles of size 1/inverse_h, split by their centers after subdivision."""
        return ladder_primal(self.domain_b, self.domain_d, inverse_h, cell_kind)

    # -- self-checks --------------------------------------------------------------

    def interface_points(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Points on Γ and the unit normal pointing out of Ω_B."""
        b, d = self.domain_b, self.domain_d
        s = np.linspace(0.0, 1.0, n)
        if np.isclose(b.x1, d.x0) or np.isclose(b.x0, d.x1):
            x = b.x1 if np.isclose(b.x1, d.x0) else b.x0
            lo, hi = max(b.y0, d.y0), min(b.y1, d.y1)
            points = np.column_stack([np.full(n, x), lo + s * (hi - lo)])
            normal = np.array([1.0, 0.0]) if x == b.x1 else np.array([-1.0, 0.0])
        else:
            y = b.y0 if np.isclose(b.y0, d.y1) else b.y1
            lo, hi = max(b.x0, d.x0), min(b.x1, d.x1)
            points = np.column_stack([lo + s * (hi - lo), np.full(n, y)])
            normal = np.array([0.0, -1.0]) if y == b.y0 else np.array([0.0, 1.0])
        return points, normal

    def check_interface(self, n: int = 101) -> float:
        """Largest violation of u_B·n = u_D·n, p_B = p_D and L n = 0 along Γ."""
        points, normal = self.interface_points(n)
        flux_gap = (self.velocity_b(points) - self.velocity_d(points)) @ normal
        pressure_gap = self.pressure_b(points) - self.pressure_d(points)
        traction = self.l_exact(points).reshape(-1, 2, 2) @ normal
        return float(max(np.abs(flux_gap).max(), np.abs(pressure_gap).max(),
                         np.abs(traction).max()))

    def check_sources(self, n_points: int = SELF_CHECK_POINTS, seed: int = 0) -> dict[str, float]:
        """Relative residuals of the derived sources against central differences of the
        exact fields at random points."""
        rng = np.random.default_rng(seed)
        h = FD_STEP
        margin = 3.0 * h

        def sample(domain: Rectangle) -> np.ndarray:
            x = rng.uniform(domain.x0 + margin, domain.x1 - margin, n_points)
            y = rng.uniform(domain.y0 + margin, domain.y1 - margin, n_points)
            return np.column_stack([x, y])

        def shifted(points: np.ndarray, axis: int, step: float) -> np.ndarray:
            moved = points.copy()
            moved[:, axis] += step
            return moved

        def derivative(f: ScalarField, points: np.ndarray, axis: int) -> np.ndarray:
            forward = 8 * f(shifted(points, axis, h)) - f(shifted(points, axis, 2 * h))
            backward = 8 * f(shifted(points, axis, -h)) - f(shifted(points, axis, -2 * h))
            return (forward - backward) / (12 * h)

        def laplacian(f: ScalarField, points: np.ndarray) -> np.ndarray:
            total = -60.0 * f(points)
            for axis in range(2):
                total = total + (-f(shifted(points, axis, 2 * h)) + 16 * f(shifted(points, axis, h))
                                 + 16 * f(shifted(points, axis, -h))
                                 - f(shifted(points, axis, -2 * h)))
            return total / (12 * h * h)

        def relative(residual: np.ndarray, *scales: np.ndarray) -> float:
            scale = max([1.0] + [float(np.abs(s).max()) for s in scales])
            return float(np.abs(residual).max()) / scale

        xb, xd = sample(self.domain_b), sample(self.domain_d)
        eps, alpha = self.epsilon, self.alpha
        results: dict[str, float] = {}

        momentum_b = []
        for i in range(2):
            diffusion = -eps * laplacian(self.u_b[i], xb)
            drag = alpha * self.u_b[i](xb)
            pressure = derivative(self.p_b, xb, i)
            momentum_b.append(relative(diffusion + drag + pressure - self.f_brinkman(xb)[:, i],
                                       diffusion, drag, pressure))
        results["brinkman_momentum"] = max(momentum_b)
        div_b = derivative(self.u_b[0], xb, 0) + derivative(self.u_b[1], xb, 1)
        results["brinkman_mass"] = relative(div_b - self.g_brinkman(xb), div_b)
        div_w = sum(
            derivative(lambda x, i=i: self.brinkman_lifting(x)[:, i], xb, i) for i in range(2)
        )
        results["lifting_mass"] = relative(div_w - self.g_brinkman(xb), div_w)

        momentum_d = []
        for i in range(2):
            pressure = self.k_darcy * derivative(self.p_d, xd, i)
            velocity = self.u_d[i](xd)
            momentum_d.append(relative(velocity + pressure - self.f_darcy(xd)[:, i],
                                       velocity, pressure))
        results["darcy_momentum"] = max(momentum_d)
        div_d = derivative(self.u_d[0], xd, 0) + derivative(self.u_d[1], xd, 1)
        results["darcy_mass"] = relative(div_d - self.f_source(xd), div_d)

        t = float(rng.uniform(0.0, 1.0))

        def c(x: np.ndarray) -> np.ndarray:
            return self.concentration(x, t)

        def advective(velocity: VectorField, axis: int) -> ScalarField:
            return lambda x: c(x) * velocity(x)[:, axis]

        transport = []
        for points, velocity_field in ((xb, self.velocity_b), (xd, self.velocity_d)):
            c_t = (self.concentration(points, t + h) - self.concentration(points, t - h)) / (2 * h)
            advection = sum(
                derivative(advective(velocity_field, axis), points, axis) for axis in range(2)
            )
            diffusion = -self.k_diff * laplacian(c, points)
            residual = c_t + advection + diffusion - self.source(points, t)
            transport.append(relative(residual, c_t, advection, diffusion))
        results["transport"] = max(transport)
        return results

    def verify(self, n_points: int = SELF_CHECK_POINTS, seed: int = 0) -> None:
        """Raise ConfigError when a derived source or the interface conditions fail."""
        residuals = self.check_sources(n_points, seed)
        residuals["interface"] = self.check_interface()
        self.residuals.update(residuals)
        failed = {
            name: value
            for name, value in residuals.items()
            if value > (INTERFACE_TOL if name == "interface" else SELF_CHECK_TOL)
        }
        if failed:
            detail = ", ".join(f"{name}={value:.2e}" for name, value in failed.items())
            raise ConfigError(f"case {self.case_id} fails its self-check: {detail}", key="case")
        logger.info(
            f"Case {self.case_id} self-check passed: "
            + ", ".join(f"{name}={value:.1e}" for name, value in residuals.items())
        )


# -- case definitions -------------------------------------------------------------

X = Polynomial([0.0, 1.0])
BRINKMAN_LEFT = Rectangle(x0=0.0, x1=0.5, y0=0.0, y1=1.0)
DARCY_RIGHT = Rectangle(x0=0.5, x1=1.0, y0=0.0, y1=1.0)


def _shared_pressures() -> tuple[Separable, Separable]:
    """p_B = x(½−x)²(y−½) and p_D = x(½−x)²y(1−y)."""
    cubic = product(X, (0.5 - X) ** 2)
    p_b = separable(Factor((Wave(cubic),)), poly(-0.5, 1.0))
    p_d = separable(Factor((Wave(cubic),)), poly(0.0, 1.0, -1.0))
    return p_b, p_d


def _concentration() -> Separable:
    """C = (cos πx + cos πy)/π."""
    one = poly(1.0)
    return Separable(((1.0 / np.pi, cosine(np.pi), one), (1.0 / np.pi, one, cosine(np.pi))))


def _polynomial_case() -> dict[str, object]:
    bump_x = Factor((Wave(product(X**2, (0.5 - X) ** 2)),))
    bump_y = Factor((Wave(product(X**2, (1.0 - X) ** 2)),))
    u_b = separable(bump_x, bump_y)
    u_d1 = separable(poly(0.25, -2.0, 3.0), poly(0.0, -1.0, 1.0))
    u_d2 = separable(Factor((Wave(product(X, (2.0 * X - 1.0) ** 2) * 0.25),)), poly(-1.0, 2.0))
    p_b, p_d = _shared_pressures()
    return {"u_b": (u_b, u_b), "u_d": (u_d1, u_d2), "p_b": p_b, "p_d": p_d}


def _trigonometric_case() -> dict[str, object]:
    u_b = separable(sine_squared(2.0 * np.pi, X**2), sine_squared(np.pi, X**2))
    u_d = separable(sine(2.0 * np.pi), cosine(2.0 * np.pi))
    p_b, p_d = _shared_pressures()
    return {"u_b": (u_b, u_b), "u_d": (u_d, u_d), "p_b": p_b, "p_d": p_d}


_BUILDERS = {"ex1": _polynomial_case, "ex2": _trigonometric_case}


def build_case(
    case_id: str,
    *,
    epsilon: float = 1.0,
    alpha: float = 1.0,
    k_darcy: float = 1.0,
    k_diff: float = 1.0,
    check: bool = True,
) -> ManufacturedCase:
    """Build a manufactured case with parameter overrides and run its self-check."""
    if case_id not in _BUILDERS:
        raise ConfigError(
            f"unknown manufactured case '{case_id}', expected one of "
            f"{', '.join(MANUFACTURED_CASES)}",
            key="case",
        )
    for name, value, allow_zero in (("epsilon", epsilon, False), ("alpha", alpha, True),
                                    ("kdarcy", k_darcy, False), ("kdiff", k_diff, False)):
        if value < 0.0 or (value == 0.0 and not allow_zero):
            raise ConfigError(f"{name} must be {'non-negative' if allow_zero else 'positive'}",
                              key=name)
    fields = _BUILDERS[case_id]()
    case = ManufacturedCase(
        case_id=case_id,
        domain_b=BRINKMAN_LEFT,
        domain_d=DARCY_RIGHT,
        spatial_c=_concentration(),
        epsilon=epsilon,
        alpha=alpha,
        k_darcy=k_darcy,
        k_diff=k_diff,
        **fields,  # type: ignore[arg-type]
    )
    if check:
        case.verify()
    return case
