import numpy as np
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional
from loguru import logger

from src.algebra.tracial import DomainError, OrliczError, schatten_norm
from src.davis.certificates import (
    LEPINGLE_CONSTANT,
    InequalityRow,
    deviation_row,
    identity_row,
    lepingle_yor_check,
    ratio_row,
    report_row,
    row_lemma_check,
    verify_type1,
    verify_type2,
)
from src.davis.decomposition import (
    classical_cross_check,
    davis_type1,
    davis_type2,
    martingale_davis,
    previsible_davis,
)
from src.harness.config import ExperimentConfig
from src.harness.instances import MAX_FAMILY_STEPS, Instance, InstanceGenerator, burkholder_gundy_family
from src.harness.operators import martingale_transform, random_signs, stein_map
from src.harness.search import ExtremalSearch
from src.kfunc.functionals import Couple, brute_force_k, brute_force_split_k, k_functional, solve_profile
from src.martingales.filtration import Martingale, parse_filtration
from src.norms.spaces import SymmetricSpace, symmetric_space_norm
from src.norms.square import col_l2_norm, hardy_norms, square_fn
from src.orlicz.functions import OrliczFunction, matuszewska_indices, plog
from src.orlicz.moments import phi_burkholder_check, phi_davis_check, quadratic_identity_rows, three_way_split

INDEX_FIXTURES = [(1.3, 0.7), (2.0, 1.0)]
ORACLE_RESOLUTION = 2.5e-4
FALSIFY_EXPONENT = 0.5


@dataclass
class CheckContext:
    """Per-run objects shared by every check: parsed spaces, built Φ families, tolerances."""
    config: ExperimentConfig
    phis: List[OrliczFunction] = field(default_factory=list)
    spaces: List[SymmetricSpace] = field(default_factory=list)

    @classmethod
    def from_config(cls, config: ExperimentConfig) -> "CheckContext":
        needs_phi = any(c in config.checks for c in ("phi-davis", "phi-burkholder", "phi-stability"))
        return cls(
            config=config,
            phis=config.build_phis() if needs_phi else [],
            spaces=[SymmetricSpace.parse(spec) for spec in config.burkholder_spaces],
        )


def _stream(instance: Instance, tag: int) -> np.random.Generator:
    """Independent RNG stream of an instance for one check."""
    return np.random.default_rng([instance.seed, tag])


def regime_of(space: SymmetricSpace) -> str:
    """'max' when E sits above L_2 (all exponents >= 2), 'sum' otherwise."""
    exponents = [space.p] if space.kind == "Lp" else [space.p, space.q]
    if space.kind != "sum" and min(exponents) >= 2.0:
        return "max"
    return "sum"


# --- per-instance checks ---
def check_davis_type1(ctx: CheckContext, inst: Instance) -> List[InequalityRow]:
    rows = []
    for p in ctx.config.p_grid:
        d = davis_type1(inst.adapted, p)
        rows.extend(verify_type1(d, inst.adapted, ctx.config.q_grid).rows)
        rows.append(deviation_row("type1-reconstruction", d.reconstruction_error(),
                                  tol=1e-8 * max(1.0, float(np.max(np.abs(inst.adapted.terms))))))
        if inst.filtration.is_commutative:
            rows.append(classical_cross_check(d))
    return rows


def check_davis_type2(ctx: CheckContext, inst: Instance) -> List[InequalityRow]:
    rows = []
    for p in ctx.config.p_small_grid:
        d = davis_type2(inst.adapted, p)
        rows.extend(verify_type2(d, inst.adapted).rows)
        if inst.filtration.is_commutative:
            rows.append(classical_cross_check(d))
    return rows


def check_martingale_davis(ctx: CheckContext, inst: Instance) -> List[InequalityRow]:
    rows = []
    for p in [p for p in ctx.config.p_grid if 1.0 <= p < 2.0]:
        rows.extend(martingale_davis(inst.martingale, p, 2.0)[2].rows)
    return rows


def check_previsible(ctx: CheckContext, inst: Instance) -> List[InequalityRow]:
    return previsible_davis(inst.martingale)[2].rows


def check_lepingle(ctx: CheckContext, inst: Instance) -> List[InequalityRow]:
    rows = lepingle_yor_check(inst.adapted).rows
    row = lepingle_yor_check(inst.adapted, side="row").rows[0]
    row.check = "lepingle-row"
    return rows + [row]


def check_orthogonality(ctx: CheckContext, inst: Instance) -> List[InequalityRow]:
    """‖x‖_2² = Σ‖dx_n‖_2² = ‖S_c(x)‖_2² = ‖s_c(x)‖_2²."""
    x = inst.martingale
    tol = ctx.config.tolerances.identity
    final = schatten_norm(x.final, 2.0) ** 2
    diagonal = float(sum(schatten_norm(d, 2.0) ** 2 for d in x.differences))
    big_s = float(np.real(np.trace(square_fn(x).final_squared)))
    small_s = float(np.real(np.trace(square_fn(x, conditioned=True).final_squared)))
    return [
        identity_row("orthogonality-diagonal", final, diagonal, tol, p=2.0),
        identity_row("orthogonality-square", final, big_s, tol, p=2.0),
        identity_row("orthogonality-conditioned", final, small_s, tol, p=2.0),
    ]


def check_row_lemma(ctx: CheckContext, inst: Instance) -> List[InequalityRow]:
    rng = _stream(inst, 1)
    algebra = inst.filtration.algebra
    rows = []
    for p, q, r in ctx.config.row_lemma_exponents:
        a = np.stack([algebra.random_ginibre(rng) for _ in range(inst.filtration.length)])
        rows.extend(row_lemma_check(a, algebra.random_ginibre(rng), p, q, r).rows)
    return rows


def check_kfunc_oracle(ctx: CheckContext, inst: Instance) -> List[InequalityRow]:
    """Convex-optimization K against brute force on a D = 2 profile and over 2x2 operator splits.

    One (t, p, q) point of the grid per instance.
    """
    rng = _stream(inst, 2)
    points = ctx.config.kfunc_points
    t, p, q = points[inst.index % len(points)]
    s = rng.uniform(0.05, 0.5, size=2)
    couple = Couple(p, q)
    solved = solve_profile(s, t, couple).value
    brute = brute_force_k(s, t, couple, resolution=ORACLE_RESOLUTION)
    row = identity_row("kfunc-oracle", solved, brute, ctx.config.tolerances.oracle, p=p, q=q, absolute=True)
    # generic real 2x2 operator, not normal
    x = rng.uniform(-1.0, 1.0, size=(2, 2))
    split = identity_row("kfunc-split-oracle", k_functional(x, t, couple), brute_force_split_k(x, t, couple),
                         ctx.config.tolerances.split_oracle, p=p, q=q, absolute=True)
    row.note = split.note = f"t={t:g}"
    return [row, split]


def _witness_norm(x: Martingale, space: SymmetricSpace) -> float:
    """h_E^c(x^c) + h_E^r(x^r) + h_E^d(x^d) for the three-way split."""
    exponent = float(np.clip(space.p, 1.0, 1.5))
    x_d, x_c, x_r = three_way_split(x, exponent)
    return (hardy_norms(x_c, space, ["h_c"])["h_c"] + hardy_norms(x_r, space, ["h_r"])["h_r"]
            + hardy_norms(x_d, space, ["h_d"])["h_d"])


def burkholder_rows(x: Martingale, space: SymmetricSpace) -> List[InequalityRow]:
    """Two-sided regime-max ratios, or the regime-sum inf-side witness ratio."""
    final = symmetric_space_norm(x.final, space)
    label = space.describe()
    if regime_of(space) == "max":
        norms = hardy_norms(x, space, ["h_d", "h_c", "h_r"])
        best = max(norms["h_d"], norms["h_c"], norms["h_r"])
        return [
            report_row("burkholder-max-upper", final, best, p=space.p, q=space.q or float("nan"), note=label),
            report_row("burkholder-max-lower", best, final, p=space.p, q=space.q or float("nan"), note=label),
        ]
    return [report_row("burkholder-sum-upper", _witness_norm(x, space), final,
                       p=space.p, q=space.q or float("nan"), note=label)]


def check_burkholder(ctx: CheckContext, inst: Instance) -> List[InequalityRow]:
    x = inst.martingale
    rows = []
    for space in ctx.spaces:
        rows.extend(burkholder_rows(x, space))
    small_s = square_fn(x, conditioned=True).final
    rows.append(identity_row("burkholder-p2", schatten_norm(x.final, 2.0), schatten_norm(small_s, 2.0),
                             ctx.config.tolerances.multiplicative, p=2.0))
    return rows


def check_transform(ctx: CheckContext, inst: Instance) -> List[InequalityRow]:
    x = inst.martingale
    tx = martingale_transform(x, random_signs(_stream(inst, 3), x.length))
    rows = [report_row("transform", symmetric_space_norm(tx.final, s), symmetric_space_norm(x.final, s),
                       p=s.p, q=s.q or float("nan"), note=s.describe()) for s in ctx.spaces]
    before, after = square_fn(x).final_squared, square_fn(tx).final_squared
    scale = max(1.0, float(np.max(np.abs(before))))
    rows.append(deviation_row("transform-square-invariance", float(np.max(np.abs(after - before))), 1e-8 * scale))
    rows.append(identity_row("transform-l2", schatten_norm(tx.final, 2.0), schatten_norm(x.final, 2.0),
                             ctx.config.tolerances.identity, p=2.0))
    return rows


def check_e_davis_max(ctx: CheckContext, inst: Instance) -> List[InequalityRow]:
    rows = []
    for space in ctx.spaces:
        norms = hardy_norms(inst.martingale, space, ["H_c", "h_d", "h_c"])
        rows.append(report_row("e-davis-max", norms["H_c"], max(norms["h_d"], norms["h_c"]),
                               p=space.p, q=space.q or float("nan"), note=space.describe()))
    return rows


def check_stein(ctx: CheckContext, inst: Instance) -> List[InequalityRow]:
    """Stein ratio on raw (non-adapted) Ginibre terms."""
    rng = _stream(inst, 4)
    f = inst.filtration
    a = np.stack([f.algebra.random_ginibre(rng) for _ in range(f.length)])
    theta = stein_map(f, a)
    return [report_row("stein", col_l2_norm(theta, q), col_l2_norm(a, q), q=q) for q in ctx.config.stein_q_grid]


def check_phi_davis(ctx: CheckContext, inst: Instance) -> List[InequalityRow]:
    rows = quadratic_identity_rows(inst.martingale).rows
    for phi in ctx.phis:
        try:
            cert = phi_davis_check(phi, inst.martingale)
        except DomainError as e:
            logger.debug(f"{phi.name}: {e}")
            continue
        for row in cert.rows:
            row.note = phi.name
        rows.extend(cert.rows)
    return rows


def phi_regime(phi: OrliczFunction) -> Optional[str]:
    if phi.is_q_concave(2.0):
        return "2-concave"
    if phi.is_p_convex(2.0):
        return "2-convex"
    return None


def check_phi_burkholder(ctx: CheckContext, inst: Instance) -> List[InequalityRow]:
    rows = []
    for phi in ctx.phis:
        regime = phi_regime(phi)
        if regime is None:
            logger.debug(f"{phi.name}: neither 2-concave nor 2-convex, skipped")
            continue
        try:
            cert = phi_burkholder_check(phi, inst.martingale, regime)
        except DomainError as e:
            logger.debug(f"{phi.name}: {e}")
            continue
        for row in cert.rows:
            row.note = phi.name
        rows.extend(cert.rows)
    return rows


def check_falsify_small_p(ctx: CheckContext, inst: Instance) -> List[InequalityRow]:
    """‖x‖_p / ‖S_c(x)‖_p at p = 1/2 on the classical family with 1 + (index mod MAX_FAMILY_STEPS) steps."""
    steps = 1 + inst.index % MAX_FAMILY_STEPS
    x = burkholder_gundy_family(steps)
    p = FALSIFY_EXPONENT
    return [report_row("falsify-small-p", schatten_norm(x.final, p), col_l2_norm(x, p), p=p,
                       note=f"steps={steps}")]


InstanceCheck = Callable[[CheckContext, Instance], List[InequalityRow]]

INSTANCE_REGISTRY: Dict[str, InstanceCheck] = {
    "davis-type1": check_davis_type1,
    "davis-type2": check_davis_type2,
    "martingale-davis": check_martingale_davis,
    "previsible": check_previsible,
    "lepingle": check_lepingle,
    "orthogonality": check_orthogonality,
    "row-lemma": check_row_lemma,
    "kfunc-oracle": check_kfunc_oracle,
    "burkholder": check_burkholder,
    "transform": check_transform,
    "e-davis-max": check_e_davis_max,
    "stein": check_stein,
    "phi-davis": check_phi_davis,
    "phi-burkholder": check_phi_burkholder,
    "falsify-small-p": check_falsify_small_p,
}


# --- global checks ---
def check_lepingle_extremal(ctx: CheckContext) -> List[InequalityRow]:
    settings = ctx.config.search
    search = ExtremalSearch(settings.check, parse_filtration(settings.filtration), ctx.config.seed,
                            settings.restarts, settings.iterations, settings.sigma, settings.patience)
    result = search.run()
    if settings.check != "lepingle":
        return [report_row(f"{settings.check}-extremal", result.best_ratio, 1.0,
                           note=f"start={result.origin} gain={result.climb_gain:.3e}")]
    provenance = f"start={result.origin} start_ratio={result.start_ratio:.6g} gain={result.climb_gain:.3e}"
    floor = InequalityRow("lepingle-extremal-floor", result.best_ratio, 1.0, settings.floor, p=1.0, kind="lower",
                          note=provenance)
    ratio = ratio_row("lepingle-extremal", result.best_ratio, 1.0, LEPINGLE_CONSTANT, p=1.0)
    ratio.note = provenance
    return [ratio, floor]


def check_orlicz_indices(ctx: CheckContext) -> List[InequalityRow]:
    tol = ctx.config.tolerances.index
    rows = []
    for p, q in INDEX_FIXTURES:
        estimate = matuszewska_indices(plog(p, q))
        rows.append(identity_row("orlicz-index-lower", estimate.lower, p, tol, p=p, q=q, absolute=True))
        rows.append(identity_row("orlicz-index-upper", estimate.upper, p + q, tol, p=p, q=q, absolute=True))
    return rows


def _family_maxima(ctx: CheckContext, spec: str, measure: Callable[[Martingale], Dict[str, float]]) -> Dict[str, float]:
    f = parse_filtration(spec)
    generator = InstanceGenerator(f, f, ctx.config.seed)
    maxima: Dict[str, float] = {}
    for index in range(ctx.config.stability_instances):
        for key, value in measure(generator.instance(index).martingale).items():
            maxima[key] = max(maxima.get(key, -np.inf), value)
    return maxima


def _stability_rows(ctx: CheckContext, check: str,
                    measure: Callable[[Martingale], Dict[str, float]]) -> List[InequalityRow]:
    """Family max of each ratio per size; consecutive sizes must agree within the stability tolerance."""
    threshold = 1.0 + ctx.config.tolerances.stability
    dims = ctx.config.dims
    maxima = [_family_maxima(ctx, spec, measure) for spec in dims]
    rows = []
    for (small, big), (small_max, big_max) in zip(zip(dims, dims[1:]), zip(maxima, maxima[1:])):
        for key in sorted(set(small_max) & set(big_max)):
            hi, lo = max(small_max[key], big_max[key]), min(small_max[key], big_max[key])
            rows.append(report_row(check, hi, lo, threshold=threshold, note=f"{key} {small}->{big}"))
    return rows


def check_phi_stability(ctx: CheckContext) -> List[InequalityRow]:
    """Family maxima of the Φ-Davis and Φ-Burkholder ratios (each Φ in its own regime) across sizes."""
    def measure(x: Martingale) -> Dict[str, float]:
        ratios = {}
        for phi in ctx.phis:
            regime = phi_regime(phi)
            runs = [("davis", lambda: phi_davis_check(phi, x))]
            if regime is not None:
                runs.append((regime, lambda: phi_burkholder_check(phi, x, regime)))
            for label, run in runs:
                try:
                    cert = run()
                except (DomainError, OrliczError) as e:
                    logger.debug(f"{phi.name} ({label}): {e}")
                    continue
                ratios.update({f"{phi.name}:{row.check}": row.ratio for row in cert.rows})
        return ratios

    return _stability_rows(ctx, "phi-stability", measure)


def check_burkholder_stability(ctx: CheckContext) -> List[InequalityRow]:
    spaces = [s for s in ctx.spaces if regime_of(s) == "max"]

    def measure(x: Martingale) -> Dict[str, float]:
        return {f"{s.describe()}:{row.check}": row.ratio for s in spaces for row in burkholder_rows(x, s)}

    return _stability_rows(ctx, "burkholder-stability", measure)


GlobalCheck = Callable[[CheckContext], List[InequalityRow]]

GLOBAL_REGISTRY: Dict[str, GlobalCheck] = {
    "lepingle-extremal": check_lepingle_extremal,
    "orlicz-indices": check_orlicz_indices,
    "phi-stability": check_phi_stability,
    "burkholder-stability": check_burkholder_stability,
}
