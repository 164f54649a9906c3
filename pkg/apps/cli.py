"""
Command-line front end for Jordan-block systems.

Loads JSON descriptors, runs degeneracy, constraint, solution, verification
and Hamiltonian analyses, and writes CSV fields or JSON reports. Logs go to
stderr so that data outputs stay byte-deterministic for a given seed.

Exit codes: 0 success, 1 internal error, 2 input error, 3 numeric domain
error, 4 failed precondition.
"""

import argparse
import io
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.constraints import (
    ConstraintSpec,
    compat_residual_2x2,
    compat_residual_two_block,
    hardrod_f_residual,
    hardrod_phi,
    involution_residual,
    phi_closed_form_2x2,
    two_block_residual_labels,
)
from core.descriptors import field_descriptor, load_constraint, load_family, load_system
from core.errors import (
    DescriptorError,
    FieldDomainError,
    PreconditionError,
    SingularLocusError,
    map_numeric_exception,
)
from core.fieldfn import Point, parse_expression
from core.hamiltonian import hamiltonian_report
from core.sampling import DEFAULT_BOX, sample_points
from core.settings import NumericsSettings, get_settings
from core.solutions import (
    FamilyConfig,
    GridSpec,
    K1Reading,
    Variant,
    closed_config,
    create_family,
    eval_grid,
    write_grid_csv,
)
from core.systems import JordanSystem, cofactor_char_poly
from core.verify import adjudicate, h_ladder, verify_variant

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
DEFAULT_SOLVE_GRID = "0,2,21,0,0.9,10"
DEFAULT_VERIFY_GRID = "0.2,0.8,20,0.05,0.5,10"
TABLE_SIZE = 10
HARDROD_MIN_GAP = 0.1

Handler = Callable[[argparse.Namespace, NumericsSettings], int]


# Output


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    logger.info(f"Wrote {out}")


def _emit_json(payload: Dict[str, Any], out: Optional[Path]) -> None:
    _emit(json.dumps(payload, indent=2, sort_keys=True) + "\n", out)


def _sup_over(
    points: Sequence[Point], fn: Callable[[Point], Any]
) -> Tuple[Optional[np.ndarray], int]:
    """Componentwise sup of |fn| over points; singular points are counted and skipped."""
    worst: Optional[np.ndarray] = None
    skipped = 0
    for point in points:
        try:
            values = np.abs(np.atleast_1d(np.asarray(fn(point), dtype=float)))
        except (SingularLocusError, FieldDomainError) as e:
            skipped += 1
            logger.debug(f"Skipping u={point.u}: {e}")
            continue
        worst = values if worst is None else np.maximum(worst, values)
    return worst, skipped


def _as_list(values: Optional[np.ndarray]) -> Optional[List[float]]:
    return None if values is None else [float(v) for v in values]


# Commands


def cmd_check_degeneracy(args: argparse.Namespace, settings: NumericsSettings) -> int:
    """Linear degeneracy criterion against the per-block eigenvalue test."""
    system, _ = load_system(args.system)
    points = sample_points(system.n, args.samples, args.box, args.seed)
    tolerance = settings.degeneracy_tolerance

    lindeg_sup = 0.0
    lindeg_min = np.full(system.n, np.inf)
    lindeg_max = np.full(system.n, -np.inf)
    block_sup = np.zeros(len(system.blocks))
    poly_gap = 0.0
    nilpotency = 0.0
    disagreements = 0
    for point in points:
        row = system.lindeg_residual(point)
        blocks = np.abs(system.block_degeneracy(point))
        lindeg_sup = max(lindeg_sup, float(np.max(np.abs(row))))
        lindeg_min, lindeg_max = np.minimum(lindeg_min, row), np.maximum(lindeg_max, row)
        block_sup = np.maximum(block_sup, blocks)
        if (np.max(np.abs(row)) < tolerance) != bool(np.all(blocks < tolerance)):
            disagreements += 1
        oracle = cofactor_char_poly(system.assemble(point))
        gap = np.abs(system.char_poly(point) - oracle) / np.maximum(1.0, np.abs(oracle))
        poly_gap = max(poly_gap, float(np.max(gap)))
        nilpotency = max(nilpotency, float(np.max(system.block_nilpotency(point))))
        system.eigenvalue_separation(point, settings)

    degenerate = lindeg_sup < tolerance
    if disagreements:
        verdict = "inconsistent"
    elif degenerate:
        verdict = "linearly degenerate"
    else:
        verdict = "not linearly degenerate"
    logger.info(f"'{system.name}': {verdict} over {len(points)} samples")
    _emit_json(
        {
            "system": system.name,
            "n": system.n,
            "samples": len(points),
            "seed": args.seed,
            "box": list(args.box),
            "tolerance": tolerance,
            "lindeg_sup": lindeg_sup,
            "lindeg_min": lindeg_min.tolist(),
            "lindeg_max": lindeg_max.tolist(),
            "block_degeneracy_sup": block_sup.tolist(),
            "equivalent": disagreements == 0,
            "disagreements": disagreements,
            "char_poly_max_relative_gap": poly_gap,
            "nilpotency_sup": nilpotency,
            "verdict": verdict,
        },
        args.out,
    )
    return 0


def cmd_derive_phi(args: argparse.Namespace, settings: NumericsSettings) -> int:
    """Closed-form 2x2 constraint tabulated on a 10x10 grid over the box."""
    system, _ = load_system(args.system)
    f1 = parse_expression(args.f1, 2)
    phi = phi_closed_form_2x2(system, f1, args.base, settings=settings)
    axis = np.linspace(args.box[0], args.box[1], TABLE_SIZE)
    table = [
        [phi.eval(Point(t=0.0, x=0.0, u=(float(u1), float(u2)))) for u2 in axis] for u1 in axis
    ]
    _emit_json(
        {
            "system": system.name,
            "f1": args.f1,
            "u1_ref": args.base,
            "u1": axis.tolist(),
            "u2": axis.tolist(),
            "phi": table,
            "field": field_descriptor(phi, system),
        },
        args.out,
    )
    return 0


def _family_config(args: argparse.Namespace, settings: NumericsSettings) -> FamilyConfig:
    config = load_family(args.family, settings)
    overrides: Dict[str, Any] = {}
    variant = getattr(args, "variant", None)
    if variant in (Variant.PAPER.value, Variant.REDERIVED.value):
        overrides["variant"] = Variant(variant)
    if args.k1 is not None:
        overrides["k1"] = K1Reading(args.k1)
    if not overrides:
        return config
    return closed_config(replace(config, **overrides), settings)


def cmd_solve(args: argparse.Namespace, settings: NumericsSettings) -> int:
    """Field values on a grid as CSV; flagged points keep their status."""
    grid = GridSpec.parse(args.grid)
    config = _family_config(args, settings)
    rows = eval_grid(config, grid, settings)
    buffer = io.StringIO()
    write_grid_csv(rows, create_family(config, settings).n, buffer)
    _emit(buffer.getvalue(), args.out)
    return 0


def cmd_verify(args: argparse.Namespace, settings: NumericsSettings) -> int:
    """Finite-difference verdict of one variant, or adjudication of both."""
    grid = GridSpec.parse(args.grid)
    hs = h_ladder(args.h, args.levels)
    config = _family_config(args, settings)
    if args.variant == "both":
        report = adjudicate(config, grid, hs, args.seed, settings)
        payload = report.model_dump(mode="json")
    else:
        payload = verify_variant(config, grid, hs, args.seed, settings).model_dump(mode="json")
    _emit_json(payload, args.out)
    return 0


def cmd_hamiltonian(args: argparse.Namespace, settings: NumericsSettings) -> int:
    """Tsarev, flatness and theta residuals of the Hankel metric."""
    system, _ = load_system(args.system)
    f1 = parse_expression(args.f1, 2)
    points = sample_points(system.n, args.samples, args.box, args.seed)
    report = hamiltonian_report(system, f1, points, args.base, args.seed, settings)
    _emit_json(report.model_dump(mode="json"), args.out)
    return 0


def _compat_points(args: argparse.Namespace, system: JordanSystem, hardrod: bool) -> List[Point]:
    if not hardrod:
        return sample_points(system.n, args.samples, args.box, args.seed)
    # oversample and keep points away from the u2 = u4 locus
    candidates = sample_points(system.n, 8 * args.samples, args.box, args.seed)
    kept = [p for p in candidates if abs(p.u[1] - p.u[3]) > args.min_gap][: args.samples]
    if len(kept) < args.samples:
        raise DescriptorError(
            f"Only {len(kept)} of {args.samples} samples have |u2 - u4| > {args.min_gap}"
        )
    return kept


def cmd_compat(args: argparse.Namespace, settings: NumericsSettings) -> int:
    """Compatibility residual sup-norms of a constraint over seeded samples."""
    system, descriptor = load_system(args.system)
    params = descriptor.params
    hardrod = False
    fields = []
    if args.constraint is not None:
        constraint_descriptor = load_constraint(args.constraint)
        hardrod = constraint_descriptor.hardrod_f is not None
        fields = constraint_descriptor.fields(system, params)
        spec: ConstraintSpec = constraint_descriptor.build(system, params, settings)
    elif args.f1 is not None:
        f1 = parse_expression(args.f1, 2)
        phi = phi_closed_form_2x2(system, f1, args.base, settings=settings)
        spec = ConstraintSpec.for_blocks(system, [phi])
    else:
        raise DescriptorError("compat needs --constraint or --f1")

    points = _compat_points(args, system, hardrod)
    payload: Dict[str, Any] = {
        "system": system.name,
        "samples": len(points),
        "seed": args.seed,
        "box": list(args.box),
        "constraint": [field.source for field in spec.fields],
        "notes": [],
    }
    sizes = [block.size for block in system.blocks]

    if hardrod:
        a = float(params.get("a", 1.0))
        corrected, skipped = _sup_over(
            points, lambda p: hardrod_f_residual(*fields, p, a, settings=settings)
        )
        printed, _ = _sup_over(
            points, lambda p: hardrod_f_residual(*fields, p, a, printed=True, settings=settings)
        )
        payload["hardrod_f"] = {"corrected": _as_list(corrected), "printed": _as_list(printed)}
        payload["skipped"] = skipped
    elif sizes == [2]:
        worst, skipped = _sup_over(points, lambda p: compat_residual_2x2(system, spec, p))
        values = _as_list(worst)
        payload["compat_2x2"] = None if values is None else {"r_a": values[0], "r_b": values[1]}
        payload["skipped"] = skipped
    elif len(sizes) == 2:
        phi1, phi2 = spec.fields
        worst, skipped = _sup_over(
            points, lambda p: compat_residual_two_block(system, phi1, phi2, p)
        )
        labels = two_block_residual_labels(sizes[0], sizes[1])
        payload["two_block"] = None if worst is None else dict(zip(labels, worst.tolist()))
        payload["skipped"] = skipped
    else:
        payload["notes"].append(f"no specialized conditions for block sizes {sizes}")

    try:
        worst, _ = _sup_over(points, lambda p: involution_residual(system, spec, p))
        payload["involution_sup"] = None if worst is None else float(np.max(worst))
    except PreconditionError as e:
        payload["involution_sup"] = None
        payload["notes"].append(e.error_detail.message)
    _emit_json(payload, args.out)
    return 0


# Parsing


def _box(text: str) -> Tuple[float, float]:
    try:
        lo, hi = (float(part) for part in text.split(","))
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"box must be 'lo,hi', got '{text}'") from e
    if not lo < hi:
        raise argparse.ArgumentTypeError(f"box needs lo < hi, got '{text}'")
    return lo, hi


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _common_options() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--seed", type=int, default=0, help="sampling seed (default: 0)")
    parent.add_argument("--out", type=Path, help="output file (default: stdout)")
    parent.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="log level (default: TOEPLITZ_LOG_LEVEL or INFO)",
    )
    tolerances = parent.add_argument_group("tolerance overrides")
    tolerances.add_argument("--root-tolerance", type=float, help="target |X(sigma, t) - x|")
    tolerances.add_argument("--singular-guard", type=float, help="singular locus distance")
    tolerances.add_argument("--ode-local-error", type=float, help="RK4 local error limit")
    tolerances.add_argument("--residual-bound", type=float, help="scale-aware verdict bound")
    tolerances.add_argument("--pass-order", type=float, help="minimum convergence order")
    return parent


def _sampling_options(parser: argparse.ArgumentParser, samples: int) -> None:
    parser.add_argument(
        "--samples", type=_positive_int, default=samples, help=f"sample count (default: {samples})"
    )
    parser.add_argument(
        "--box",
        type=_box,
        default=DEFAULT_BOX,
        help=f"sampling box lo,hi for every field (default: {DEFAULT_BOX[0]},{DEFAULT_BOX[1]})",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="toeplitz",
        description="Linear degeneracy, differential constraints and exact solutions "
        "of Jordan-block quasilinear systems.",
    )
    commands = parser.add_subparsers(dest="command", required=True, metavar="command")
    common = _common_options()

    check = commands.add_parser(
        "check-degeneracy", parents=[common], help="linear degeneracy verdict of a system"
    )
    check.add_argument("system", type=Path, help="system descriptor JSON")
    _sampling_options(check, 100)
    check.set_defaults(handler=cmd_check_degeneracy)

    derive = commands.add_parser(
        "derive-phi", parents=[common], help="closed-form constraint of a 2x2 block"
    )
    derive.add_argument("system", type=Path, help="2x2 system descriptor JSON")
    derive.add_argument("--f1", default="1", help="function of u2 (default: 1)")
    derive.add_argument(
        "--base", type=float, default=0.0, help="u1 quadrature base (default: 0)"
    )
    derive.add_argument(
        "--box",
        type=_box,
        default=DEFAULT_BOX,
        help=f"table range lo,hi for u1 and u2 (default: {DEFAULT_BOX[0]},{DEFAULT_BOX[1]})",
    )
    derive.set_defaults(handler=cmd_derive_phi)

    solve = commands.add_parser("solve", parents=[common], help="evaluate a family on a grid")
    solve.add_argument("family", type=Path, help="family descriptor JSON")
    solve.add_argument(
        "--grid",
        default=DEFAULT_SOLVE_GRID,
        help=f"x0,x1,nx,t0,t1,nt (default: {DEFAULT_SOLVE_GRID})",
    )
    solve.add_argument("--variant", choices=["paper", "rederived"], help="override the variant")
    solve.add_argument("--k1", choices=[r.value for r in K1Reading], help="HardRod1 k1 reading")
    solve.set_defaults(handler=cmd_solve)

    verify = commands.add_parser(
        "verify", parents=[common], help="finite-difference verdict of a family"
    )
    verify.add_argument("family", type=Path, help="family descriptor JSON")
    verify.add_argument(
        "--h", type=float, default=1e-2, help="largest stencil step (default: 0.01)"
    )
    verify.add_argument(
        "--levels", type=int, default=4, help="number of halved steps, at least 3 (default: 4)"
    )
    verify.add_argument(
        "--grid",
        default=DEFAULT_VERIFY_GRID,
        help=f"x0,x1,nx,t0,t1,nt (default: {DEFAULT_VERIFY_GRID})",
    )
    verify.add_argument(
        "--variant", choices=["paper", "rederived", "both"], default="both",
        help="variant to verify (default: both, with adjudication)",
    )
    verify.add_argument("--k1", choices=[r.value for r in K1Reading], help="HardRod1 k1 reading")
    verify.set_defaults(handler=cmd_verify)

    hamiltonian = commands.add_parser(
        "hamiltonian", parents=[common], help="Hankel metric residuals of a 2x2 block"
    )
    hamiltonian.add_argument("system", type=Path, help="2x2 system descriptor JSON")
    hamiltonian.add_argument("--f1", default="1", help="function of u2 (default: 1)")
    hamiltonian.add_argument(
        "--base", type=float, default=0.0, help="u1 quadrature base (default: 0)"
    )
    _sampling_options(hamiltonian, 100)
    hamiltonian.set_defaults(handler=cmd_hamiltonian)

    compat = commands.add_parser(
        "compat", parents=[common], help="compatibility residuals of a constraint"
    )
    compat.add_argument("system", type=Path, help="system descriptor JSON")
    source = compat.add_mutually_exclusive_group()
    source.add_argument("--constraint", type=Path, help="constraint descriptor JSON")
    source.add_argument("--f1", help="2x2 only: use the closed-form constraint for this f1")
    compat.add_argument("--base", type=float, default=0.0, help="u1 quadrature base (default: 0)")
    compat.add_argument(
        "--min-gap",
        type=float,
        default=HARDROD_MIN_GAP,
        help=f"hard-rod samples keep |u2 - u4| above this (default: {HARDROD_MIN_GAP})",
    )
    _sampling_options(compat, 100)
    compat.set_defaults(handler=cmd_compat)
    return parser


def _settings(args: argparse.Namespace) -> NumericsSettings:
    return get_settings().with_overrides(
        log_level=args.log_level,
        root_tolerance=args.root_tolerance,
        singular_guard=args.singular_guard,
        ode_local_error=args.ode_local_error,
        residual_bound=args.residual_bound,
        pass_order=args.pass_order,
    )


def _configure_logging(level: str) -> None:
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)
    logging.getLogger().setLevel(level)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one command.

    Args:
        argv: Arguments without the program name (defaults to sys.argv[1:])

    Returns:
        Process exit code
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = _settings(args)
        _configure_logging(settings.log_level)
        handler: Handler = args.handler
        return handler(args, settings)
    except Exception as e:
        error = map_numeric_exception(e)
        if error.exit_code == 1:
            logger.exception(f"{args.command} failed unexpectedly")
        else:
            logger.error(f"{args.command} failed: {error.error_detail.message}")
        document = {"error": error.error_detail.to_dict()}
        sys.stderr.write(json.dumps(document, sort_keys=True, default=str) + "\n")
        return error.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
