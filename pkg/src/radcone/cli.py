"""Command-line experiment harness.

Exit status: 0 on success, 1 if any bound check was violated (violating rows
are kept in the output), 2 on unreadable or invalid input.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from radcone import bounds, campaigns, conefit, egm, metrics
from radcone.errors import RadconeError
from radcone.geometry import load_scene, save_scene, scene_from_dict
from radcone.radiosity import solve_direct, solve_neumann, write_field_csv
from radcone.scenes import BUNDLED, bundled_scene_dict

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT = 0, 1, 2

# named tolerances that --tol may override
TOLERANCES = {
    "holds_slack": bounds.HOLDS_SLACK,
    "neumann_tol": 1e-10,
    "fid_min_frac": 0.1,
}


class InputError(Exception):
    pass


def _parse_tol(items):
    tol = dict(TOLERANCES)
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep or name not in tol:
            raise InputError(f"bad --tol {item!r}; expected NAME=VALUE with NAME in {sorted(tol)}")
        try:
            tol[name] = float(value)
        except ValueError:
            raise InputError(f"bad --tol value {value!r}") from None
    return tol


def _scene(arg):
    if arg is None:
        raise InputError("--scene is required")
    if arg in BUNDLED and not Path(arg).exists():
        scene, _ = scene_from_dict(bundled_scene_dict(arg))
        return scene
    path = Path(arg)
    if not path.exists():
        raise InputError(f"{arg}: no such file (bundled scenes: {', '.join(BUNDLED)})")
    scene, _ = load_scene(path)
    return scene


def _out(args, default):
    return Path(args.out or default)


def _write_csv(path, header, rows):
    campaigns.write_rows(path, header, rows)


# --- commands ------------------------------------------------------------------


def cmd_render(args, tol):
    scene = _scene(args.scene)
    n_e = scene.luminaires.n_luminaires
    theta = np.full(n_e, 1.0 / n_e) if args.theta is None else np.array(args.theta, dtype=float)
    if theta.shape != (n_e,) or np.any(theta < 0):
        raise InputError(f"--theta needs {n_e} non-negative weights")
    e = scene.luminaires.emittance(theta)
    if args.method == "neumann":
        field = solve_neumann(scene, e, tol=tol["neumann_tol"])
        summary = f"neumann bounces={field.bounces} converged={field.converged}"
    else:
        field = solve_direct(scene, e)
        summary = "direct"
    out = _out(args, "radiosity.csv")
    write_field_csv(out, field)
    print(f"render: {scene.n_patches} patches, {summary}, wrote {out}")
    return EXIT_OK


def cmd_perturb(args, tol):
    """One seeded joint perturbation of the scene: writes V' as JSON and prints the report."""
    scene = _scene(args.scene)
    rng = campaigns.trial_rng(args.seed, 0)
    cfg = campaigns.PerturbConfig(max_cond=args.max_cond)
    t, delta, e, e_prime = campaigns.draw_perturbation(rng, scene, cfg, "joint")
    rep = bounds.verify_perturbation(scene, t, delta, e, e_prime)
    perturbed = bounds.perturbed_scene(scene, t, delta)
    out = _out(args, "perturbed_scene.json")
    save_scene(perturbed, out)
    row = {"trial": 0, "eps_E": rep.eps_E, "eps_rho": rep.eps_rho, "p": rep.p, "p_prime": rep.p_prime,
           "cond_c": rep.cond_c, "actual": rep.actual_diff, "bound": rep.bound,
           "holds": rep.actual_diff <= rep.bound + tol["holds_slack"]}
    _write_csv(out.with_suffix(".csv"), campaigns.PERTURB_COLUMNS, [row])
    print(f"perturb: actual={campaigns.fmt(rep.actual_diff)} bound={campaigns.fmt(rep.bound)} "
          f"holds={campaigns.fmt(row['holds'])}, wrote {out}")
    return EXIT_OK if row["holds"] else EXIT_VIOLATION


def cmd_verify_bounds(args, tol):
    cfg = campaigns.PerturbConfig(max_cond=args.max_cond)
    if args.scene is not None:
        scene = _scene(args.scene)
        rows = campaigns.fixed_scene_campaign(scene, args.trials, args.seed, args.threads, cfg)
    else:
        rows = campaigns.perturbation_campaign(args.trials, args.seed, args.factor, args.threads, cfg)
    for r in rows:
        r["holds"] = bool(r["actual"] <= r["bound"] + tol["holds_slack"])
    out = _out(args, "bounds.csv")
    _write_csv(out, campaigns.PERTURB_COLUMNS, rows)
    bad = sum(not r["holds"] for r in rows)
    print(f"verify-bounds: {len(rows)} trials, {bad} violations, wrote {out}")
    return EXIT_VIOLATION if bad else EXIT_OK


def cmd_egm(args, tol):
    if args.scene is not None:
        scene = _scene(args.scene)
        basis = egm.radiosity_basis(scene)
        c = egm.second_moment(basis, egm.dirichlet_second_moment(basis.n_e, args.alpha))
        g = egm.egm_fit(c, args.rank)
        report = {
            "rank": args.rank,
            "eigvals": [float(x) for x in c.eigvals],
            "loss": egm.egm_loss(g, c),
            "tail_sum": egm.tail_sum(c, args.rank),
            "generators": g.matrix_g.T.tolist(),
        }
        out = _out(args, "egm.json")
        out.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
        print(f"egm: rank {args.rank} loss={campaigns.fmt(report['loss'])}, wrote {out}")
        return EXIT_OK
    cfg = campaigns.EgmConfig(rank=args.rank, alpha=args.alpha)
    rows = campaigns.egm_campaign(args.trials, args.seed, args.threads, cfg)
    out = _out(args, "egm.csv")
    _write_csv(out, campaigns.EGM_COLUMNS, rows)
    loose_bad = sum(not r["loose_holds"] for r in rows)
    lp_bad = sum(not r["lp_holds"] for r in rows)
    print(f"egm: {len(rows)} trials, loose bound violations {loose_bad}, lp bound violations {lp_bad}, wrote {out}")
    return EXIT_VIOLATION if loose_bad or lp_bad else EXIT_OK


def cmd_conefit(args, tol):
    if args.generators is None or args.target is None:
        raise InputError("conefit needs --generators and --target")
    gens = conefit.GeneratorSet(metrics.read_matrix(args.generators))
    target = conefit.read_vector_csv(args.target)
    if not args.raw:
        target = conefit.normalize_shading(target)
    result = conefit.fit_exact(target, gens) if args.exact else conefit.fit_approx(target, gens, args.ngd)
    out = _out(args, "fit.json")
    conefit.write_fit_json(out, result)
    print(f"conefit: residual_sq={campaigns.fmt(result.residual_sq)}, wrote {out}")
    return EXIT_OK


def _two_sets(args):
    paths = args.embeddings or []
    if len(paths) != 2:
        raise InputError("fid needs two --embeddings files")
    return [metrics.load_embeddings(p) for p in paths]


def cmd_fid(args, tol):
    a, b = _two_sets(args)
    row = {"n_a": len(a), "n_b": len(b), "fid": metrics.fid(a, b)}
    header = ["n_a", "n_b", "fid"]
    if args.infinity:
        fit = metrics.fid_infinity_fit(a, b, args.sizes, args.seed, tol["fid_min_frac"])
        row.update(fid_infinity=fit.intercept, fid_infinity_se=fit.intercept_se)
        header += ["fid_infinity", "fid_infinity_se"]
    out = _out(args, "fid.csv")
    _write_csv(out, header, [row])
    print("fid: " + " ".join(f"{k}={campaigns.fmt(row[k])}" for k in header[2:]) + f", wrote {out}")
    return EXIT_OK


def cmd_lfid(args, tol):
    if not args.embeddings or args.candidates is None:
        raise InputError("lfid needs --embeddings and --candidates")
    base = metrics.load_embeddings(args.embeddings[0])
    cand = metrics.read_matrix(args.candidates)
    if cand.shape[1] != base.dim + 1:
        raise InputError(f"{args.candidates}: rows must be index followed by {base.dim} coordinates")
    pairs = []
    for row in cand:
        idx = int(row[0])
        if idx != row[0] or not 0 <= idx < len(base):
            raise InputError(f"{args.candidates}: bad point index {row[0]}")
        pairs.append((idx, row[1:]))
    ranked = metrics.local_fid_ranking(base, pairs, args.eig_floor)
    out = _out(args, "lfid.csv")
    _write_csv(out, ["rank", "index", "lfid"],
               [{"rank": i, "index": idx, "lfid": val} for i, (idx, _, val) in enumerate(ranked)])
    print(f"lfid: ranked {len(ranked)} candidates, wrote {out}")
    return EXIT_OK


def cmd_msd(args, tol):
    if args.originals is None or args.relights is None:
        raise InputError("msd needs --originals and --relights")
    orig = metrics.read_matrix(args.originals)
    rel = metrics.read_matrix(args.relights)
    if orig.shape != rel.shape:
        raise InputError(f"originals {orig.shape} and relights {rel.shape} differ in shape")
    value = metrics.msd(list(orig), list(rel))
    out = _out(args, "msd.csv")
    _write_csv(out, ["n_pairs", "msd"], [{"n_pairs": orig.shape[0], "msd": value}])
    print(f"msd: {campaigns.fmt(value)}, wrote {out}")
    return EXIT_OK


COMMANDS = {
    "render": cmd_render,
    "perturb": cmd_perturb,
    "verify-bounds": cmd_verify_bounds,
    "egm": cmd_egm,
    "conefit": cmd_conefit,
    "fid": cmd_fid,
    "lfid": cmd_lfid,
    "msd": cmd_msd,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radcone", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--scene", help=f"scene JSON path or bundled name ({', '.join(BUNDLED)})")
    parser.add_argument("--embeddings", action="append", help="embedding matrix (.csv or .npy); repeat for fid")
    parser.add_argument("--trials", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", help="output file")
    parser.add_argument("--rank", type=int, default=2)
    parser.add_argument("--alpha", type=float, default=1.0, help="Dirichlet concentration")
    parser.add_argument("--ngd", type=int, default=1, help="projected-gradient steps")
    parser.add_argument("--eig-floor", type=float, default=metrics.DEFAULT_EIG_FLOOR)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--tol", action="append", metavar="NAME=VALUE", help="override a named tolerance")
    parser.add_argument("--factor", choices=campaigns.FACTORS, default="joint",
                        help="perturbation ingredient for random-scene campaigns")
    parser.add_argument("--max-cond", type=float, default=1.2)
    parser.add_argument("--method", choices=["direct", "neumann"], default="direct")
    parser.add_argument("--theta", type=float, nargs="+", help="luminaire weights for render")
    parser.add_argument("--generators", help="generator matrix CSV, one generator per row")
    parser.add_argument("--target", help="shading field CSV")
    parser.add_argument("--exact", action="store_true", help="exact NNLS instead of clip + gradient")
    parser.add_argument("--raw", action="store_true", help="skip shading normalization")
    parser.add_argument("--infinity", action="store_true", help="also extrapolate FID to infinite N")
    parser.add_argument("--sizes", type=int, default=15, help="subsample sizes for --infinity")
    parser.add_argument("--candidates", help="lfid candidates CSV: index then coordinates per row")
    parser.add_argument("--originals", help="msd originals CSV, one image per row")
    parser.add_argument("--relights", help="msd relights CSV, one image per row")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        if args.trials < 0 or args.threads < 1:
            raise InputError("--trials must be >= 0 and --threads >= 1")
        tol = _parse_tol(args.tol)
        return COMMANDS[args.command](args, tol)
    except (InputError, RadconeError, ValueError, OSError) as exc:
        print(f"radcone {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
