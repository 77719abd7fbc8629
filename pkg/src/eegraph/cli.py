"""Command-line interface.

Subcommands: ``graph spatial|wpli|learn|finetune``, ``interpolate``,
``homogenize``, ``synth``, ``eval-recon``. Every subcommand takes ``--seed``
(falling back to the ``GSI_SEED`` environment variable, then 0) and is
bit-reproducible for a fixed seed. Exit codes: 0 success, 1 usage error,
2 data or computation error (with a diagnostic naming the failing stage).

Report-producing commands render a PNG figure next to their delimited
output unless ``--no-figure`` is given.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .construction import (SpectralEstimationConfig, spatial_graph,
                           wpli_matrix, wpli_weighted_spatial)
from .evaluate import (eval_masked_reconstruction, graph_method, mean_method,
                       spherical_method, write_recon_csv)
from .graphs import (build_laplacian, load_graph, load_montage, save_graph,
                     subgraph)
from .interpolation import MaskSpec, interpolate, spherical_spline_interpolate
from .learning import LearnConfig, finetune_graph, learn_graph, write_loss_trace_csv
from .pipeline import (bandpass, euclidean_align, load_epochs, map_to_union,
                       resample, save_epochs, union_montage, window)
from .synth import SynthConfig, random_smooth_graph, synth_generate, synthetic_montage

__all__ = ["main", "entrypoint"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _band(text):
    try:
        low, high = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected LOW,HIGH in Hz") from None
    return low, high


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError("expected a comma-separated integer list") from None


def _name_list(text):
    return [x for x in (part.strip() for part in text.split(",")) if x]


def _resolve_seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("GSI_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ValueError(f"GSI_SEED must be an integer, got {env!r}") from None
    return 0


def _learn_config(args, seed):
    return LearnConfig(
        steps=args.steps,
        step_size=args.step_size,
        batch_size=args.batch_size,
        mask_fraction=args.mask_fraction,
        seed=seed,
        ridge=args.ridge,
        finetune_weight=getattr(args, "alpha", 0.5),
    )


def _add_learn_flags(parser):
    parser.add_argument("--steps", type=int, default=500)
    parser.add_argument("--step-size", type=float, default=1.0)
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--mask-fraction", type=float, default=0.5)
    parser.add_argument("--ridge", type=float, default=1e-8)
    parser.add_argument("--trace", metavar="CSV", help="write the per-step loss trace")


def _add_figure_flags(parser):
    parser.add_argument("--figure", metavar="PNG",
                        help="figure path (default: alongside the output)")
    parser.add_argument("--no-figure", action="store_true",
                        help="skip figure rendering")


def _figure_path(args, out_path):
    if args.no_figure:
        return None
    if args.figure:
        return Path(args.figure)
    return Path(out_path).with_suffix(".png")


def _seed_flag(parser):
    parser.add_argument("--seed", type=int, default=None,
                        help="RNG seed (default: $GSI_SEED, then 0)")


def build_parser():
    parser = _Parser(prog="eegraph", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"eegraph {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    graph = sub.add_parser("graph", help="build or learn interpolation graphs")
    gsub = graph.add_subparsers(dest="graph_command", required=True,
                                parser_class=_Parser)

    g_spatial = gsub.add_parser("spatial", help="binary radius graph from positions")
    g_spatial.add_argument("--montage", required=True)
    g_spatial.add_argument("--radius", type=float, required=True)
    g_spatial.add_argument("--out", required=True)
    _seed_flag(g_spatial)
    g_spatial.set_defaults(func=_cmd_graph_spatial, stage="graph spatial")

    g_wpli = gsub.add_parser("wpli", help="spatial graph reweighted by WPLI")
    g_wpli.add_argument("--montage", required=True)
    g_wpli.add_argument("--radius", type=float, required=True)
    g_wpli.add_argument("--epochs", required=True, help="EPB1 file with all electrodes")
    g_wpli.add_argument("--band", type=_band, default=(2.0, 40.0))
    g_wpli.add_argument("--segment-seconds", type=float, default=1.0)
    g_wpli.add_argument("--overlap", type=float, default=0.5)
    g_wpli.add_argument("--window", default="hann")
    g_wpli.add_argument("--out", required=True)
    _seed_flag(g_wpli)
    g_wpli.set_defaults(func=_cmd_graph_wpli, stage="graph wpli")

    g_learn = gsub.add_parser("learn", help="learn a graph by gradient descent")
    g_learn.add_argument("--epochs", required=True)
    g_learn.add_argument("--montage", help="montage JSON (with --radius)")
    g_learn.add_argument("--radius", type=float,
                         help="radius for the spatial warm start")
    g_learn.add_argument("--init", help="warm-start graph JSON (alternative "
                         "to --montage/--radius)")
    g_learn.add_argument("--out", required=True)
    _add_learn_flags(g_learn)
    _add_figure_flags(g_learn)
    _seed_flag(g_learn)
    g_learn.set_defaults(func=_cmd_graph_learn, stage="graph learn")

    g_ft = gsub.add_parser("finetune", help="fine-tune a graph towards a dataset")
    g_ft.add_argument("--graph", required=True, help="graph learned on dataset A")
    g_ft.add_argument("--epochs-a", required=True)
    g_ft.add_argument("--epochs-b", required=True)
    g_ft.add_argument("--alpha", type=float, default=0.5,
                      help="weight of the dataset-B loss")
    g_ft.add_argument("--out", required=True)
    _add_learn_flags(g_ft)
    _add_figure_flags(g_ft)
    _seed_flag(g_ft)
    g_ft.set_defaults(func=_cmd_graph_finetune, stage="graph finetune")

    interp = sub.add_parser("interpolate", help="replace channels of an EPB1 file")
    interp.add_argument("--graph", help="graph JSON (for --method graph)")
    interp.add_argument("--epochs", required=True)
    interp.add_argument("--mask", type=_name_list, required=True,
                        help="channel names to reconstruct, comma separated")
    interp.add_argument("--method", choices=("graph", "spherical"), default="graph")
    interp.add_argument("--montage", help="montage JSON (for --method spherical)")
    interp.add_argument("--order-m", type=int, default=4)
    interp.add_argument("--n-terms", type=int, default=50)
    interp.add_argument("--spline-ridge", type=float, default=1e-5)
    interp.add_argument("--out", required=True)
    _seed_flag(interp)
    interp.set_defaults(func=_cmd_interpolate, stage="interpolate")

    homog = sub.add_parser("homogenize",
                           help="preprocess and map onto a union montage")
    homog.add_argument("--epochs", required=True)
    homog.add_argument("--rate", type=float, help="resample to this rate")
    homog.add_argument("--band", type=_band, help="band-pass LOW,HIGH in Hz")
    homog.add_argument("--window-start", type=float)
    homog.add_argument("--window-duration", type=float)
    homog.add_argument("--align", action="store_true",
                       help="Euclidean alignment over the whole set")
    homog.add_argument("--graph", help="union graph JSON enabling interpolation")
    homog.add_argument("--target", default="union",
                       help="comma-separated channel names, or 'union'")
    homog.add_argument("--out", required=True)
    _seed_flag(homog)
    homog.set_defaults(func=_cmd_homogenize, stage="homogenize")

    synth = sub.add_parser("synth", help="generate seeded synthetic graph signals")
    synth.add_argument("--graph", help="ground-truth graph JSON")
    synth.add_argument("--nodes", type=int,
                       help="build a random ground-truth graph of this size")
    synth.add_argument("--trials", type=int, required=True)
    synth.add_argument("--samples", type=int, default=480)
    synth.add_argument("--tau", type=float, default=1.0)
    synth.add_argument("--snr-db", type=float, default=float("inf"))
    synth.add_argument("--rate", type=float, default=160.0)
    synth.add_argument("--out", required=True)
    synth.add_argument("--graph-out", help="write the ground-truth graph JSON")
    _seed_flag(synth)
    synth.set_defaults(func=_cmd_synth, stage="synth")

    ev = sub.add_parser("eval-recon", help="masked-reconstruction benchmark")
    ev.add_argument("--epochs", required=True)
    ev.add_argument("--methods", required=True,
                    help="comma-separated NAME or NAME=GRAPH.json entries; "
                    "'spherical' and 'mean' are built in")
    ev.add_argument("--graph-file", action="append", default=[],
                    metavar="NAME=PATH", help="graph file for a bare method name")
    ev.add_argument("--montage", help="montage JSON (needed for 'spherical')")
    ev.add_argument("--missing", type=_int_list, required=True)
    ev.add_argument("--repetitions", type=int, default=10)
    ev.add_argument("--out", required=True)
    _add_figure_flags(ev)
    _seed_flag(ev)
    ev.set_defaults(func=_cmd_eval_recon, stage="eval-recon")

    return parser


def _cmd_graph_spatial(args):
    montage = load_montage(args.montage)
    save_graph(spatial_graph(montage, args.radius), args.out)
    return 0


def _cmd_graph_wpli(args):
    montage = load_montage(args.montage)
    epochs = _epochs_on_montage(load_epochs(args.epochs), montage)
    cfg = SpectralEstimationConfig(
        segment_length=int(round(args.segment_seconds * epochs.rate)),
        overlap=args.overlap,
        band=args.band,
        window=args.window,
    )
    spatial = spatial_graph(montage, args.radius)
    save_graph(wpli_weighted_spatial(spatial, wpli_matrix(epochs, cfg)), args.out)
    return 0


def _epochs_on_montage(epochs, montage):
    """Reorder an EpochSet's channels into montage order (names must match)."""
    if set(epochs.channel_names) != set(montage.names):
        missing = sorted(set(montage.names) - set(epochs.channel_names))
        extra = sorted(set(epochs.channel_names) - set(montage.names))
        raise ValueError(
            f"epochs channels do not match the montage "
            f"(missing: {missing or '-'}, extra: {extra or '-'})"
        )
    if epochs.channel_names == montage.names:
        return epochs
    rows = [epochs.channel_names.index(nm) for nm in montage.names]
    return epochs.with_data(epochs.data[:, rows, :], channel_names=montage.names)


def _cmd_graph_learn(args):
    seed = _resolve_seed(args)
    epochs = load_epochs(args.epochs)
    if args.init:
        init = load_graph(args.init)
    elif args.montage and args.radius is not None:
        init = spatial_graph(load_montage(args.montage), args.radius)
    else:
        raise ValueError("provide --init, or --montage together with --radius")
    graph, trace = learn_graph(epochs, _learn_config(args, seed), init)
    save_graph(graph, args.out)
    if args.trace:
        write_loss_trace_csv(trace, args.trace)
        figure = _figure_path(args, args.trace)
        if figure is not None:
            from .figures import save_loss_figure

            save_loss_figure(trace, figure)
    return 0


def _cmd_graph_finetune(args):
    seed = _resolve_seed(args)
    graph = load_graph(args.graph)
    tuned, trace = finetune_graph(
        graph,
        load_epochs(args.epochs_a),
        load_epochs(args.epochs_b),
        _learn_config(args, seed),
    )
    save_graph(tuned, args.out)
    if args.trace:
        write_loss_trace_csv(trace, args.trace)
        figure = _figure_path(args, args.trace)
        if figure is not None:
            from .figures import save_loss_figure

            save_loss_figure(trace, figure)
    return 0


def _cmd_interpolate(args):
    epochs = load_epochs(args.epochs)
    flat = epochs.data.transpose(1, 0, 2).reshape(epochs.n_channels, -1)
    if args.method == "graph":
        if not args.graph:
            raise ValueError("--method graph needs --graph")
        graph = subgraph(load_graph(args.graph), epochs.channel_names)
        mask = MaskSpec.from_missing_names(graph.montage, args.mask)
        full = interpolate(build_laplacian(graph), flat[list(mask.observed)], mask)
    else:
        if not args.montage:
            raise ValueError("--method spherical needs --montage")
        montage = load_montage(args.montage).subset(epochs.channel_names)
        mask = MaskSpec.from_missing_names(montage, args.mask)
        full = spherical_spline_interpolate(
            montage, flat[list(mask.observed)], mask,
            order_m=args.order_m, n_terms=args.n_terms, ridge=args.spline_ridge,
        )
    data = full.reshape(epochs.n_channels, epochs.n_trials, epochs.n_samples)
    save_epochs(epochs.with_data(data.transpose(1, 0, 2)), args.out)
    return 0


def _cmd_homogenize(args):
    epochs = load_epochs(args.epochs)
    if args.rate is not None:
        epochs = resample(epochs, args.rate)
    if args.band is not None:
        epochs = bandpass(epochs, *args.band)
    if (args.window_start is None) != (args.window_duration is None):
        raise ValueError("--window-start and --window-duration go together")
    if args.window_start is not None:
        epochs = window(epochs, args.window_start, args.window_duration)
    if args.align:
        epochs = euclidean_align(epochs)
    if args.graph:
        graph = load_graph(args.graph)
        union = union_montage(graph.montage, {"input": epochs.channel_names,
                                              "union": graph.montage.names})
        targets = (graph.montage.names if args.target == "union"
                   else tuple(_name_list(args.target)))
        epochs = map_to_union(epochs, union, graph, targets)
    save_epochs(epochs, args.out)
    return 0


def _cmd_synth(args):
    seed = _resolve_seed(args)
    if (args.graph is None) == (args.nodes is None):
        raise ValueError("provide exactly one of --graph or --nodes")
    if args.graph:
        graph = load_graph(args.graph)
        data_seed = seed
    else:
        graph_seed, data_seed = (
            int(s) for s in np.random.SeedSequence(seed).generate_state(2)
        )
        graph = random_smooth_graph(synthetic_montage(args.nodes), graph_seed)
    cfg = SynthConfig(
        graph=graph,
        n_trials=args.trials,
        n_samples=args.samples,
        tau=args.tau,
        snr_db=args.snr_db,
        seed=data_seed,
        rate=args.rate,
    )
    save_epochs(synth_generate(cfg), args.out)
    if args.graph_out:
        save_graph(graph, args.graph_out)
    return 0


def _parse_methods(args, epochs):
    graph_files = {}
    for spec in args.graph_file:
        name, sep, path = spec.partition("=")
        if not sep or not name or not path:
            raise ValueError(f"--graph-file expects NAME=PATH, got {spec!r}")
        graph_files[name] = path
    methods = []
    montage = None
    for item in _name_list(args.methods):
        name, sep, path = item.partition("=")
        if sep:
            graph_files[name] = path
        if name in graph_files:
            graph = subgraph(load_graph(graph_files[name]), epochs.channel_names)
            montage = montage or graph.montage
            methods.append(graph_method(name, graph))
        elif name == "spherical":
            if not args.montage:
                raise ValueError("method 'spherical' needs --montage")
            sph = load_montage(args.montage).subset(epochs.channel_names)
            montage = montage or sph
            methods.append(spherical_method(sph))
        elif name == "mean":
            methods.append(mean_method())
        else:
            raise ValueError(
                f"method {name!r} has no graph file; use NAME=PATH or --graph-file"
            )
    if montage is None:
        if not args.montage:
            raise ValueError("supply --montage when no graph-based method is used")
        montage = load_montage(args.montage).subset(epochs.channel_names)
    return methods, montage


def _cmd_eval_recon(args):
    seed = _resolve_seed(args)
    epochs = load_epochs(args.epochs)
    methods, montage = _parse_methods(args, epochs)
    epochs = _epochs_on_montage(epochs, montage)
    report = eval_masked_reconstruction(
        epochs, methods, args.missing, args.repetitions, seed, montage
    )
    write_recon_csv(report, args.out)
    figure = _figure_path(args, args.out)
    if figure is not None:
        from .figures import save_recon_figure

        save_recon_figure(report, figure)
    return 0


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (ValueError, OSError, KeyError) as exc:
        print(f"eegraph: {args.stage}: {exc}", file=sys.stderr)
        return 2


def entrypoint():
    sys.exit(main())
