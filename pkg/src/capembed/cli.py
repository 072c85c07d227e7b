"""Command-line interface.

All randomness comes from ``--seed`` through named child streams, so a fixed
seed reproduces every output byte for byte.  Outputs go to ``--out`` or stdout.
"""

from __future__ import annotations

import json
import sys

import click
import numpy as np

from . import generators, harness
from .build_clean import GeneralBuildCleanEmbedder
from .capped_l1 import DEFAULT_BUCKET_FACTOR, CappedL1Embedder
from .caterpillar import FixedCapTreeEmbedder, decompose, snip_embed
from .diamond import MAX_LEVEL, gen_diamond
from .lazy_snake import boost_average, lazy_snake_fixed, lazy_snake_lipschitz
from .metric_core import (
    CapAssignment,
    Embedding,
    LineMetric,
    PointSet,
    log_scale,
    format_caps,
    format_embedding,
    format_points,
    format_tree,
    read_caps,
    read_points,
    read_tree,
)
from .rng import RngSeed
from .tree_ising import GeneralTimEmbedder, SymmetricTIM, SymmetricTimEmbedder, model_from_json


class Settings:
    def __init__(self, seed: int, copies: int | None, out: str | None):
        self.seed = seed
        self.copies = copies
        self.out = out

    def stream(self, label: str) -> RngSeed:
        return RngSeed(self.seed).child(label)

    def copies_for(self, n: int, default_boosted: bool) -> int:
        if self.copies is not None:
            return self.copies
        return 64 * log_scale(n) if default_boosted else 1

    def emit(self, text: str) -> None:
        if self.out in (None, "-"):
            sys.stdout.write(text)
        else:
            with open(self.out, "w", newline="") as fh:
                fh.write(text)


def _read_line(path: str) -> LineMetric:
    pts = read_points(path)
    if pts.ndim != 2 or pts.shape[1] != 1:
        raise click.BadParameter("a line file holds one coordinate per row", param_hint="--points")
    locs = pts[:, 0]
    if np.any(np.diff(locs) < 0):
        raise click.BadParameter("line coordinates must be sorted", param_hint="--points")
    return LineMetric(locs - locs[0])


@click.group()
@click.option("--seed", type=int, default=0, show_default=True, help="Master seed for every random choice.")
@click.option("--copies", type=int, default=None, help="Independent copies to average (embed: 1, eval: 64*log n).")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file; stdout when omitted.")
@click.pass_context
def main(ctx, seed, copies, out):
    """Capped-metric embeddings into l1."""
    if copies is not None and copies < 1:
        raise click.BadParameter("must be positive", param_hint="--copies")
    ctx.obj = Settings(seed, copies, out)


# ---------------------------------------------------------------- gen


@main.group()
def gen():
    """Generate random instances."""


@gen.command("tree")
@click.option("--n", "n", type=int, required=True)
@click.option("--max-weight", type=float, default=1.0, show_default=True)
@click.pass_obj
def gen_tree(s: Settings, n, max_weight):
    tree = generators.gen_random_tree(n, max_weight, s.stream("gen-tree"))
    s.emit(format_tree(tree))


@gen.command("caps")
@click.option("--tree", "tree_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--points", "line_path", type=click.Path(exists=True, dir_okay=False), help="Sorted 1-D line.")
@click.option("--low", type=float, default=0.5, show_default=True, help="Line caps only.")
@click.option("--high", type=float, default=2.0, show_default=True, help="Line caps only.")
@click.pass_obj
def gen_caps(s: Settings, tree_path, line_path, low, high):
    """Lipschitz caps for a tree or a line."""
    if (tree_path is None) == (line_path is None):
        raise click.UsageError("give exactly one of --tree or --points")
    if tree_path is not None:
        caps = generators.gen_lipschitz_caps(read_tree(tree_path), s.stream("gen-caps"))
    else:
        caps = generators.gen_line_caps(_read_line(line_path), s.stream("gen-caps"), low, high)
    s.emit(format_caps(caps.caps))


@gen.command("tim")
@click.option("--n", "n", type=int, required=True)
@click.option("--kind", type=click.Choice(["symmetric", "general"]), default="symmetric", show_default=True)
@click.pass_obj
def gen_tim(s: Settings, n, kind):
    model = generators.gen_random_tim(n, kind, s.stream("gen-tim"))
    s.emit(model.to_json() + "\n")


@gen.command("points")
@click.option("--n", "n", type=int, required=True)
@click.option("--d", "d", type=int, required=True)
@click.option("--sorted-line", is_flag=True, help="With --d 1, sort so the output is a line.")
@click.pass_obj
def gen_points(s: Settings, n, d, sorted_line):
    pts = generators.gen_points(n, d, s.stream("gen-points")).points
    if sorted_line:
        if d != 1:
            raise click.UsageError("--sorted-line needs --d 1")
        pts = np.sort(pts, axis=0)
    s.emit(format_points(pts))


@gen.command("diamond")
@click.option("--level", type=click.IntRange(0, MAX_LEVEL), required=True)
@click.option("--samples", type=int, default=0, help="Emit this many sampled assignments instead of the network.")
@click.pass_obj
def gen_diamond_cmd(s: Settings, level, samples):
    net = gen_diamond(level)
    if samples > 0:
        draws = net.sample(s.stream("gen-diamond"), samples)
        s.emit("".join(",".join(str(int(b)) for b in row) + "\n" for row in draws))
        return
    payload = {
        "level": level,
        "vectors": ["".join(str(int(b)) for b in v) for v in net.vectors],
        "switches": [
            {"x": int(x), "y": int(y), "u": int(u), "v": int(v), "level": int(lv)} for x, y, u, v, lv in net.switches
        ],
    }
    s.emit(json.dumps(payload) + "\n")


# ---------------------------------------------------------------- embed


@main.group()
def embed():
    """Embed an instance; rows of the output are the embedded points."""


def _embed_line(s: Settings, points, cap, caps_path):
    line = _read_line(points)
    if (cap is None) == (caps_path is None):
        raise click.UsageError("give exactly one of --cap or --caps")
    if cap is not None:
        run = lambda r: lazy_snake_fixed(line, cap, r)[:, None]
    else:
        caps = CapAssignment.for_line(line, read_caps(caps_path))
        run = lambda r: lazy_snake_lipschitz(line, caps, r)[:, None]
    s.emit(format_embedding(boost_average(run, s.copies_for(line.n, False), s.stream("embed"))))


@embed.command("line")
@click.option("--points", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--cap", type=float, help="Fixed cap M.")
@click.option("--caps", "caps_path", type=click.Path(exists=True, dir_okay=False), help="Lipschitz caps file.")
@click.pass_obj
def embed_line(s: Settings, points, cap, caps_path):
    _embed_line(s, points, cap, caps_path)


def _embed_tree(s: Settings, tree_path, cap, m_value, caps_path):
    tree = read_tree(tree_path)
    copies = s.copies_for(tree.n, False)
    if cap == "fixed":
        if m_value is None:
            raise click.UsageError("--cap fixed needs --M")
        embedder = FixedCapTreeEmbedder(tree, m_value)
    elif cap == "lipschitz":
        if caps_path is None:
            raise click.UsageError("--cap lipschitz needs --caps")
        embedder = GeneralBuildCleanEmbedder(tree, CapAssignment.for_tree(tree, read_caps(caps_path)))
    else:
        rows = snip_embed(tree, decompose(tree), 1.0).vectors.toarray()
        s.emit(format_embedding(Embedding(rows)))
        return
    s.emit(format_embedding(boost_average(embedder, copies, s.stream("embed"))))


_tree_options = [
    click.option("--tree", "tree_path", required=True, type=click.Path(exists=True, dir_okay=False)),
    click.option("--cap", type=click.Choice(["fixed", "lipschitz", "none"]), default="fixed", show_default=True),
    click.option("--M", "m_value", type=float, help="Cap value for --cap fixed."),
    click.option("--caps", "caps_path", type=click.Path(exists=True, dir_okay=False)),
]


def _with(options):
    def wrap(f):
        for opt in reversed(options):
            f = opt(f)
        return f

    return wrap


@embed.command("tree")
@_with(_tree_options)
@click.pass_obj
def embed_tree(s: Settings, tree_path, cap, m_value, caps_path):
    """Fixed cap, Lipschitz cap, or the uncapped isometric baseline."""
    _embed_tree(s, tree_path, cap, m_value, caps_path)


@embed.command("tim")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.pass_obj
def embed_tim(s: Settings, model_path):
    with open(model_path) as fh:
        model = model_from_json(fh.read())
    embedder = SymmetricTimEmbedder(model) if isinstance(model, SymmetricTIM) else GeneralTimEmbedder(model)
    s.emit(format_embedding(embedder.boosted(s.copies_for(model.n, False), s.stream("embed"))))


def _embed_l1(s: Settings, points, cap, buckets):
    pts = PointSet(read_points(points))
    embedder = CappedL1Embedder(pts, cap, buckets)
    s.emit(format_embedding(boost_average(embedder, s.copies_for(pts.n, False), s.stream("embed"))))


_l1_options = [
    click.option("--points", required=True, type=click.Path(exists=True, dir_okay=False)),
    click.option("--cap", required=True, type=float, help="Fixed cap M, in coordinate units."),
    click.option("--buckets", type=int, default=DEFAULT_BUCKET_FACTOR, show_default=True, help="Buckets per dimension."),
]


@embed.command("l1")
@_with(_l1_options)
@click.pass_obj
def embed_l1(s: Settings, points, cap, buckets):
    _embed_l1(s, points, cap, buckets)


@main.command("embed-tree")
@_with(_tree_options)
@click.pass_obj
def embed_tree_alias(s: Settings, tree_path, cap, m_value, caps_path):
    """Same as ``embed tree``."""
    _embed_tree(s, tree_path, cap, m_value, caps_path)


@main.command("embed-l1")
@_with(_l1_options)
@click.pass_obj
def embed_l1_alias(s: Settings, points, cap, buckets):
    """Same as ``embed l1``."""
    _embed_l1(s, points, cap, buckets)


# ---------------------------------------------------------------- eval

EVAL_KINDS = ["line-fixed", "line-lipschitz", "tree-fixed", "tree-lipschitz", "tree-isometric", "tim", "l1"]


def _setup(kind, tree_path, points, model_path, cap, caps_path, buckets) -> harness.EvalSetup:
    def need(value, flag):
        if value is None:
            raise click.UsageError(f"{kind} needs {flag}")
        return value

    if kind.startswith("line"):
        line = _read_line(need(points, "--points"))
        if kind == "line-fixed":
            return harness.setup_line_fixed(line, need(cap, "--cap"))
        return harness.setup_line_lipschitz(line, CapAssignment.for_line(line, read_caps(need(caps_path, "--caps"))))
    if kind.startswith("tree"):
        tree = read_tree(need(tree_path, "--tree"))
        if kind == "tree-fixed":
            return harness.setup_tree_fixed(tree, need(cap, "--cap"))
        if kind == "tree-lipschitz":
            caps = CapAssignment.for_tree(tree, read_caps(need(caps_path, "--caps")))
            return harness.setup_tree_lipschitz(tree, caps)
        return harness.setup_tree_isometric(tree)
    if kind == "tim":
        with open(need(model_path, "--model")) as fh:
            return harness.setup_tim(model_from_json(fh.read()))
    return harness.setup_l1(PointSet(read_points(need(points, "--points"))), need(cap, "--cap"), buckets)


@main.command("eval")
@click.argument("kind", type=click.Choice(EVAL_KINDS))
@click.option("--tree", "tree_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--points", type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--cap", type=float, help="Fixed cap M.")
@click.option("--caps", "caps_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--buckets", type=int, default=DEFAULT_BUCKET_FACTOR, show_default=True)
@click.option("--summary", "summary_path", type=click.Path(dir_okay=False), help="Summary JSON file; stderr when omitted.")
@click.pass_obj
def eval_cmd(s: Settings, kind, tree_path, points, model_path, cap, caps_path, buckets, summary_path):
    """Write the per-pair report CSV and a summary JSON."""
    setup = _setup(kind, tree_path, points, model_path, cap, caps_path, buckets)
    result = harness.run_eval(setup, s.copies_for(setup.truth.shape[0], True), s.stream("eval"))
    s.emit(harness.format_report(result.report))
    summary = harness.format_summary(result)
    if summary_path is None:
        click.echo(summary, err=True, nl=False)
    else:
        with open(summary_path, "w") as fh:
            fh.write(summary)
    if result.summary()["violations"]:
        sys.exit(2)


if __name__ == "__main__":
    main()
