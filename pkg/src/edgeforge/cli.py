"""Command line interface: ``forge <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys

import numpy as np

from .errors import ForgeError, InputError
from .graph import read_edge_list, write_edge_list

log = logging.getLogger("edgeforge")


def _dump(obj, path: str | None) -> None:
    text = json.dumps(obj, indent=2, default=_jsonable)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _jsonable(x):
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serializable: {type(x).__name__}")


def _cx(z) -> dict:
    z = complex(z)
    return {"re": z.real, "im": z.imag}


def parse_z_grid(spec: str, eta: float) -> list[complex]:
    """``label:start:stop:step`` (stop inclusive) or a comma list of energies."""
    parts = spec.split(":")
    if len(parts) == 4:
        start, stop, step = map(float, parts[1:])
        if step <= 0:
            raise InputError("grid step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        energies = start + step * np.arange(count)
    elif len(parts) == 1:
        energies = np.array([float(x) for x in spec.split(",")])
    else:
        raise InputError(f"cannot parse z grid {spec!r}")
    return [complex(float(E), eta) for E in energies]


# ----------------------------------------------------------------- commands
def cmd_sample_rrg(args) -> int:
    from .random_models import RngSpec, sample_configuration_model, sample_simple_regular

    rng = RngSpec(args.seed)
    g = sample_simple_regular(args.n, args.d, rng) if args.simple else sample_configuration_model(args.n, args.d, rng)
    write_edge_list(g, args.out)
    return 0


def cmd_percolate(args) -> int:
    from .random_models import RngSpec, percolate

    g = percolate(read_edge_list(args.input), args.p, RngSpec(args.seed))
    write_edge_list(g, args.out)
    return 0


def cmd_branching(args) -> int:
    from .random_models import RngSpec, kesten_stigum_stats

    stats = kesten_stigum_stats(args.d, args.p, args.depth, args.trials, RngSpec(args.seed))
    if stats.warning:
        log.warning(stats.warning)
    _dump(stats.to_json(), args.json)
    return 0


def cmd_nb_spectrum(args) -> int:
    from .nonbacktracking import build_nb_operator, ihara_map, nb_spectral_radius

    g = read_edge_list(args.input)
    restrict = None
    if args.restrict:
        with open(args.restrict) as fh:
            data = json.load(fh)
        restrict = data["V0"] if isinstance(data, dict) else data
    res = nb_spectral_radius(build_nb_operator(g, restrict), tol=args.tol)
    d = args.d or g.max_degree
    mapped = ihara_map(d, res.rho) if res.rho > math.sqrt(d - 1) else None
    _dump({"rho": res.rho, "iterations": res.iterations, "mapped_mu": mapped}, args.json)
    return 0


def cmd_spectrum(args) -> int:
    from .spectral import lanczos_topk

    rep = lanczos_topk(read_edge_list(args.input), args.topk, tol=args.tol)
    _dump(rep.to_json(), args.json)
    return 0


def cmd_verify(args) -> int:
    from .spectral import lanczos_topk

    g = read_edge_list(args.input)
    rep = lanczos_topk(g, args.topk, tol=args.tol).to_json()
    d = g.max_degree
    rep.update(d=d, regular=bool(g.is_regular(d)), simple=bool(g.is_simple()),
               ramanujan_bound=2 * math.sqrt(d - 1) if d > 1 else 0.0)
    _dump(rep, args.json)
    return 0


def cmd_green_law(args) -> int:
    from .greens import ParameterSet, delta_diagnostics, finitize, green_matrix, omega_residuals, ward_residual

    g0 = read_edge_list(args.input)
    op = finitize(g0, args.d)
    params = ParameterSet(max(g0.n, 3), args.d, ell_override=args.ell)
    rows = []
    for z in parse_z_grid(args.z_grid, args.eta):
        ev = green_matrix(op, z, ell=params.ell, p=args.p)
        ward = ward_residual(op, z, ev.G)
        om = omega_residuals(op, z, params, samples=args.samples, rng=args.seed, ev=ev)
        dd = delta_diagnostics(op, z, params.ell, args.p, samples=args.samples, rng=args.seed, ev=ev)
        rows.append({"z": _cx(z), "mN": _cx(ev.mN), "Q": _cx(ev.Q), "msc": _cx(ev.msc), "md": _cx(ev.md),
                     "ward_max": float(np.abs(ward).max()), "omega_max_diag": om.max_diag,
                     "omega_max_off": om.max_off, "deltaQ": _cx(dd.delta_Q), "deltam": _cx(dd.delta_m)})
    _dump(rows, args.json)
    return 0


def cmd_gadget(args) -> int:
    from .pipeline import GadgetSpec, construct_gadget, verify_gadget_lambda1
    from .random_models import RngSpec
    from .trees import target_from_mu

    tgt = target_from_mu(args.d, args.mu)
    g0, prov = construct_gadget(GadgetSpec(tgt, args.n, args.girth, args.depth), RngSpec(args.seed))
    est = verify_gadget_lambda1(g0, tgt)
    write_edge_list(g0, args.out)
    prov.update(theta=tgt.theta, theta_hat=est.theta, lambda1_hat=est.lambda1,
                supercritical=est.supercritical, gap=est.gap, edges=g0.edge_count)
    _dump(prov, args.json)
    return 0


def cmd_synth(args) -> int:
    from .pipeline import synthesize

    targets = [float(x) for x in args.targets.split(",") if x.strip()]
    res = synthesize(targets, args.d, args.base_size, depth=args.depth, seed=args.seed,
                     gadget_size=args.gadget_size, R=args.girth)
    write_edge_list(res.graph, args.out)
    _dump(res.report, args.report)
    return 0


# ------------------------------------------------------------------ parser
def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="forge", description="Regular graphs with prescribed top eigenvalues.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="build a d-regular graph with prescribed eigenvalues")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--targets", required=True, help="comma separated mu_2,...,mu_k")
    p.add_argument("--base-size", type=int, required=True)
    p.add_argument("--depth", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gadget-size", type=int, help="gadget vertex count (default: sized to the base)")
    p.add_argument("--girth", type=int, default=4)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gadget", help="sample one percolated gadget")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--girth", type=int, default=4)
    p.add_argument("--depth", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--json")
    p.set_defaults(func=cmd_gadget)

    for name, func in (("verify", cmd_verify), ("spectrum", cmd_spectrum)):
        p = sub.add_parser(name, help="top adjacency eigenvalues" + (" with regularity checks" if name == "verify" else ""))
        p.add_argument("--input", required=True)
        p.add_argument("--topk", type=int, default=4)
        p.add_argument("--tol", type=float, default=1e-10)
        p.add_argument("--json")
        p.set_defaults(func=func)

    p = sub.add_parser("green-law", help="Green's function and local-law diagnostics")
    p.add_argument("--input", required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--z-grid", required=True, help="label:start:stop:step or E1,E2,...")
    p.add_argument("--eta", type=float, default=0.05)
    p.add_argument("--ell", type=int)
    p.add_argument("--samples", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json")
    p.set_defaults(func=cmd_green_law)

    p = sub.add_parser("nb-spectrum", help="Perron value of the nonbacktracking operator")
    p.add_argument("--input", required=True)
    p.add_argument("--restrict", help="JSON list of vertex ids (or {\"V0\": [...]})")
    p.add_argument("--d", type=int)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--json")
    p.set_defaults(func=cmd_nb_spectrum)

    p = sub.add_parser("branching-stats", help="Kesten-Stigum statistics of percolated trees")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json")
    p.set_defaults(func=cmd_branching)

    p = sub.add_parser("sample-rrg", help="configuration-model random regular graph")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--simple", action="store_true", help="condition on simplicity")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample_rrg)

    p = sub.add_parser("percolate", help="bond percolation of an edge list")
    p.add_argument("--input", required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_percolate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ForgeError as exc:
        print(f"forge {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
