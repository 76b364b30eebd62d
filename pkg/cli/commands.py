"""
Subcommand handlers. Each takes the parsed arguments, writes its outputs and
returns the exit code.
"""

import json
import logging
from argparse import Namespace
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from analytic import AnalyticSpectrum, compare_to_nystrom, write_comparison_csv, write_spectrum_csv
from config import OutputConfig
from errors import FileFormatError, UsageError
from geometry import (
    TriangleMesh, read_landmarks, read_mask, read_metaimage, read_ply,
    symmetric_mean_distance, write_metaimage, write_ply,
)
from kernels import gauss, load_kernel
from lowrank import (
    DomainSampler, LowRankGP,
    build_lowrank, confidence_for_tau, eigenfunction_bound, eigenvalue_bound, eigenvalue_sum_bound,
    gaussian_1d, image_box, interval_1d, load_lowrank, points_for_eigenvalue_accuracy,
    projection_error_experiment, save_lowrank, select_model, surface, tau_for_confidence,
)
from registration import (
    FitResult, ImageEnergy, Optimizer, SurfaceEnergy,
    hybrid_fit, make_optimizer, resample_target, surface_fitter, warp_mesh,
)
from regression import ObservationSet, observations_from_landmarks, posterior_lowrank
from shapemodel import (
    DiscreteModel, compactness, discretize, generalization_errors, load_discrete, specificity,
)

logger = logging.getLogger("GPMorph.CLI")


# ========================================
# Shared helpers
# ========================================

def _fmt(value: float) -> str:
    return format(float(value), OutputConfig.FLOAT_FORMAT)


def _emit(payload: dict, out: Optional[str] = None) -> None:
    """Print a JSON report and optionally write it to a file."""
    text = json.dumps(payload, indent=OutputConfig.JSON_INDENT)
    print(text)
    if out:
        OutputConfig.ensure_parent(Path(out)).write_text(text + "\n", encoding="utf-8")


def _load_model(path: str) -> Union[LowRankGP, DiscreteModel]:
    """Low-rank or discrete model, told apart by the manifest's format field."""
    try:
        manifest = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise FileFormatError(f"cannot read model {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise FileFormatError(f"{path}: invalid JSON: {e}") from e
    if isinstance(manifest, dict) and manifest.get("format") == OutputConfig.DISCRETE_FORMAT:
        return load_discrete(path)
    return load_lowrank(path)


def _reference_mesh(path: Optional[str], gp: LowRankGP) -> TriangleMesh:
    path = path or gp.reference
    if not path:
        raise UsageError("model records no reference mesh; pass --reference")
    if Path(path).suffix.lower() != ".ply":
        raise UsageError(f"reference {path} is not a mesh (.ply)")
    return read_ply(path)


def _read_meshes(directory: str) -> Tuple[List[str], List[TriangleMesh]]:
    folder = Path(directory)
    if not folder.is_dir():
        raise UsageError(f"{directory} is not a directory")
    paths = sorted(folder.glob("*.ply"))
    if not paths:
        raise UsageError(f"no .ply meshes in {directory}")
    return [p.name for p in paths], [read_ply(p) for p in paths]


def _sampler(args: Namespace, seed: int) -> Tuple[DomainSampler, Optional[str]]:
    """Sampler for --domain / --interval / --gaussian, and the reference path to record."""
    if args.interval is not None:
        return interval_1d(args.interval[0], args.interval[1], seed=seed), None
    if args.gaussian is not None:
        return gaussian_1d(args.gaussian, seed=seed), None
    domain = Path(args.domain)
    suffix = domain.suffix.lower()
    if suffix == ".ply":
        return surface(read_ply(domain), seed=seed), str(domain.resolve())
    if suffix == ".mhd":
        image = read_metaimage(domain)
        if args.mask:
            image = image.with_mask(read_mask(args.mask))
        return image_box(image, seed=seed), str(domain.resolve())
    raise UsageError(f"domain {args.domain} must be a mesh (.ply) or image (.mhd)")


def _observations(args: Namespace, dim: int) -> ObservationSet:
    given = [args.landmarks_ref is not None, args.landmarks_target is not None]
    if any(given) and not all(given):
        raise UsageError("--landmarks-ref and --landmarks-target go together")
    if args.landmark_sigma < 0:
        raise UsageError(f"--landmark-sigma must be non-negative, got {args.landmark_sigma}")
    noise = args.landmark_sigma ** 2
    if not all(given):
        return ObservationSet.empty(dim, dim, noise)
    return observations_from_landmarks(read_landmarks(args.landmarks_ref),
                                       read_landmarks(args.landmarks_target), noise)


def _optimizer(args: Namespace) -> Optimizer:
    options: Dict[str, float] = {}
    if args.optimizer in ("gd", "sgd") and args.step is not None:
        options["step"] = args.step
    if args.optimizer == "sgd":
        options["batch"] = args.batch
    return make_optimizer(args.optimizer, seed=args.seed, **options)


def _write_fit(out: Path, result: FitResult, extra: dict) -> Path:
    payload = result.to_dict()
    payload.update(extra)
    path = OutputConfig.ensure_parent(out.with_suffix(".json"))
    path.write_text(json.dumps(payload, indent=OutputConfig.JSON_INDENT) + "\n", encoding="utf-8")
    return path


# ========================================
# Model building
# ========================================

def cmd_build_model(args: Namespace) -> int:
    kernel = load_kernel(args.kernel)
    sampler, reference = _sampler(args, args.seed)
    options = dict(oversampling=args.oversampling, power_iters=args.power_iters,
                   seed=args.seed, method=args.method, reference=reference)
    if args.variance_fraction is not None:
        gp = select_model(kernel, sampler, args.variance_fraction, n=args.n,
                          max_rank=args.max_rank, **options)
    else:
        rank = args.rank if args.rank is not None else min(args.max_rank, args.n * kernel.output_dim)
        gp = build_lowrank(kernel, None, sampler, args.n, rank, **options)
    save_lowrank(gp, args.out)

    cumulative = np.cumsum(gp.eigenvalues) / gp.total_variance
    print(f"{'i':>5}  {'lambda':>24}  {'cumulative':>24}")
    for i, (value, fraction) in enumerate(zip(gp.eigenvalues, cumulative)):
        print(f"{i:>5}  {_fmt(value):>24}  {_fmt(fraction):>24}")
    retained = cumulative[-1] if len(cumulative) else 0.0
    print(f"rank {gp.rank}, retained variance fraction {_fmt(retained)}")
    return 0


def cmd_sample(args: Namespace) -> int:
    if args.count < 1:
        raise UsageError(f"--count must be positive, got {args.count}")
    gp = load_lowrank(args.model)
    reference = _reference_mesh(args.reference, gp)
    coefficients = np.random.default_rng(args.seed).standard_normal((args.count, gp.rank))
    for i, alpha in enumerate(coefficients):
        path = write_ply(f"{args.out_prefix}{i:03d}.ply", warp_mesh(gp, reference, alpha))
        logger.info(f"Wrote sample {i} to {path}")
    return 0


def cmd_posterior(args: Namespace) -> int:
    if args.sigma < 0:
        raise UsageError(f"--sigma must be non-negative, got {args.sigma}")
    gp = load_lowrank(args.model)
    observations = observations_from_landmarks(read_landmarks(args.landmarks_ref),
                                               read_landmarks(args.landmarks_target), args.sigma ** 2)
    _, _, posterior = posterior_lowrank(gp, observations)
    save_lowrank(posterior, args.out)
    print(f"posterior rank {posterior.rank} (prior {gp.rank}) from {len(observations)} landmarks")
    return 0


# ========================================
# Fitting
# ========================================

def _run_fit(gp: LowRankGP, energy, args: Namespace) -> FitResult:
    observations = _observations(args, gp.output_dim)
    return hybrid_fit(gp, observations, energy, _optimizer(args),
                      max_iters=args.max_iters, tol=args.tol)


def cmd_fit_surface(args: Namespace) -> int:
    gp = load_lowrank(args.model)
    reference = _reference_mesh(args.reference, gp)
    target = read_ply(args.target)
    energy = SurfaceEnergy.create(gp, reference, target, eta=args.eta, n_points=args.points, seed=args.seed)
    result = _run_fit(gp, energy, args)

    warped = warp_mesh(result.model, reference, result.alpha)
    write_ply(args.out, warped)
    distance = symmetric_mean_distance(warped, target, seed=args.seed)
    report = _write_fit(Path(args.out), result, {"surface_distance": distance})
    print(f"energy {_fmt(result.total)}, converged {result.converged}, "
          f"iterations {result.iterations}, surface distance {_fmt(distance)}")
    logger.info(f"Wrote {args.out} and {report}")
    return 0


def cmd_fit_image(args: Namespace) -> int:
    gp = load_lowrank(args.model)
    reference = read_metaimage(args.reference)
    if args.mask:
        reference = reference.with_mask(read_mask(args.mask))
    target = read_metaimage(args.target)
    energy = ImageEnergy.create(gp, reference, target, eta=args.eta, n_points=args.points, seed=args.seed)
    result = _run_fit(gp, energy, args)

    resampled = resample_target(result.model, result.alpha, reference, target)
    write_metaimage(args.out, resampled)
    domain = reference.domain_points()
    residual = float(np.mean(np.abs(resampled.interpolate(domain) - reference.interpolate(domain))))
    report = _write_fit(Path(args.out), result, {"mean_absolute_residual": residual})
    print(f"energy {_fmt(result.total)}, converged {result.converged}, "
          f"iterations {result.iterations}, mean absolute residual {_fmt(residual)}")
    logger.info(f"Wrote {args.out} and {report}")
    return 0


# ========================================
# Evaluation
# ========================================

def _discrete(model, reference: Optional[str]) -> DiscreteModel:
    if isinstance(model, DiscreteModel):
        return model
    mesh = _reference_mesh(reference, model)
    return discretize(model, mesh.vertices, mesh.triangles)


def cmd_eval_model(args: Namespace) -> int:
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    unknown = sorted(set(metrics) - {"specificity", "compactness"})
    if unknown or not metrics:
        raise UsageError(f"unknown metrics {', '.join(unknown) or '(none given)'}; "
                         "choose from specificity, compactness")
    model = _discrete(_load_model(args.model), args.reference)
    report: dict = {"rank": model.rank}
    if "specificity" in metrics:
        _, training = _read_meshes(args.training)
        report["specificity"] = specificity(model, training, n_samples=args.samples, seed=args.seed)
    if "compactness" in metrics:
        components = model.rank if args.components is None else args.components
        report["components"] = components
        report["compactness"] = compactness(model, components)
    _emit(report, args.out)
    return 0


def cmd_generalize(args: Namespace) -> int:
    model = _load_model(args.model)
    if isinstance(model, DiscreteModel):
        if model.triangles is None:
            raise UsageError("discrete model has no triangles to fit with")
        reference = TriangleMesh(model.points, model.triangles)
    else:
        reference = _reference_mesh(args.reference, model)
    names, targets = _read_meshes(args.targets)
    fitter = surface_fitter(reference, eta=args.eta, optimizer=_optimizer(args), n_points=args.points,
                            max_iters=args.max_iters, tol=args.tol, seed=args.seed)
    mean, errors = generalization_errors(model, targets, fitter, seed=args.seed)
    _emit({"mean": mean, "errors": dict(zip(names, errors))}, args.out)
    return 0


# ========================================
# Validation and bounds
# ========================================

def cmd_validate_nystrom(args: Namespace) -> int:
    spectrum = AnalyticSpectrum(args.sigma, args.s2)
    if args.rank < 1:
        raise UsageError(f"--rank must be positive, got {args.rank}")
    gp = build_lowrank(gauss(1.0, args.sigma, output_dim=1), None, gaussian_1d(args.s2, seed=args.seed),
                       args.n, args.rank, seed=args.seed, method="dense")
    rows = compare_to_nystrom(spectrum, gp, args.rank - 1)
    write_comparison_csv(args.out, rows)
    print(f"{'i':>4}  {'analytic':>24}  {'nystrom':>24}  {'rel_err':>24}")
    for row in rows:
        print(f"{row.index:>4}  {_fmt(row.analytic_eigenvalue):>24}  "
              f"{_fmt(row.nystrom_eigenvalue):>24}  {_fmt(row.eigenvalue_error):>24}")
    return 0


def cmd_project_error(args: Namespace) -> int:
    kernel = load_kernel(args.kernel)
    sampler, _ = _sampler(args, args.seed)
    gp = select_model(kernel, sampler, args.variance_fraction, n=args.n, max_rank=args.max_rank,
                      seed=args.seed, method=args.method)
    # probes come from an independent draw of the same domain
    probes, _ = _sampler(args, args.seed + 1)
    error = projection_error_experiment(kernel, gp, probes, args.probes, args.trials, seed=args.seed)
    _emit({"rank": gp.rank, "n": gp.n, "variance_fraction": args.variance_fraction,
           "probes": args.probes, "trials": args.trials, "relative_error": error}, args.out)
    return 0


def cmd_analytic_spectrum(args: Namespace) -> int:
    if args.count < 1:
        raise UsageError(f"--count must be positive, got {args.count}")
    spectrum = AnalyticSpectrum(args.sigma, args.s2)
    write_spectrum_csv(args.out, spectrum, args.count)
    print(f"decay ratio {_fmt(spectrum.decay_ratio)}, total variance {_fmt(spectrum.total_variance())}")
    return 0


def cmd_bounds(args: Namespace) -> int:
    tau = args.tau if args.tau is not None else tau_for_confidence(args.confidence)
    report = {
        "kappa": args.kappa,
        "tau": tau,
        "confidence": confidence_for_tau(tau),
        "n": args.n,
        "eigenvalue_bound": eigenvalue_bound(args.kappa, tau, args.n),
        "eigenvalue_sum_bound": eigenvalue_sum_bound(args.kappa, tau, args.n),
    }
    if args.gap is not None:
        min_n, bound = eigenfunction_bound(args.kappa, tau, args.n, args.gap)
        report["eigenfunction_min_n"] = min_n
        report["eigenfunction_bound"] = bound
    if args.tolerance is not None:
        report["points_for_tolerance"] = points_for_eigenvalue_accuracy(args.kappa, tau, args.tolerance)
    _emit(report)
    return 0


COMMANDS = {
    "build-model": cmd_build_model,
    "sample": cmd_sample,
    "posterior": cmd_posterior,
    "fit-surface": cmd_fit_surface,
    "fit-image": cmd_fit_image,
    "eval-model": cmd_eval_model,
    "generalize": cmd_generalize,
    "validate-nystrom": cmd_validate_nystrom,
    "project-error": cmd_project_error,
    "analytic-spectrum": cmd_analytic_spectrum,
    "bounds": cmd_bounds,
}
