"""Command-line interface.

Subcommands::

    deepabc simulate   simulate a dataset, or one observation with --observed
    deepabc train      fit a dnn / ffnn / semiauto summary on a dataset
    deepabc abc        rejection ABC for an observation with a given summary
    deepabc oracle     exact posterior (MA(2) grid or small-lattice Ising)
    deepabc eval       rmse, moments, mse and monotonicity tables

All commands read one JSON experiment config (``--config``, or the built-in
defaults for ``--model``), adjusted with ``--scale`` and ``--set key=value``.
Every output records the config hash and the seed it used.

Exit codes: 0 success, 2 usage or schema error, 3 numerical failure,
4 empty acceptance.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import evaluation as ev
from . import nn, pipelines, semiauto
from .core import (DatasetFormatError, RngStream, load_dataset, prior_from_dict,
                   save_dataset)
from .models import ising, ma2, model_from_dict, simulate_dataset
from .rejection import (AbcBudgetExceeded, AbcConfig, abc_reject_exact, abc_reject_summary,
                        dnn_summary, ising_posterior_mean_summary, ising_sufficient_summary,
                        linear_summary, ma2_autocov_summary)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_EMPTY = 0, 2, 3, 4

log = logging.getLogger("deepabc")

OBS_FORMAT = "deepabc-observation"
BUILTIN_SUMMARIES = ("ising-sufficient", "ma2-autocov", "exact-posterior-mean", "exact-match")


class UsageError(Exception):
    pass


class EmptyAcceptance(Exception):
    pass


# --------------------------------------------------------------------------
# configuration

_COMMON = {
    "data": {"n_train": 1_000_000, "n_val": 100_000, "n_test": 100_000},
    "nn": {
        "hidden": [100, 100, 100],
        "ffnn_hidden": [100],
        "epochs": 200,
        "minibatch_size": 64,
        "learning_rate": 0.01,
        "lr_schedule": "step",
        "decay_every": 50,
        "decay_factor": 0.5,
        "l2_lambda": 0.0,
        "early_stopping_patience": 0,
    },
    "abc": {"n_proposals": 1_000_000, "quantile": 0.001, "epsilon": None,
            "distance": None, "budget": 10_000_000},
    "seeds": {"data": 1, "init": 2, "train": 3, "abc": 4, "obs": 5},
}

_MODEL_DEFAULTS = {
    "ising": {
        "model": {"model": "ising", "m": 10, "burn_in": 1000, "sweeps": 1},
        "prior": {"kind": "exponential", "mean": 0.4406},
        "semiauto": {"basis": "raw"},
        "oracle": {"resolution": 200},
    },
    "ma2": {
        "model": {"model": "ma2", "p": 100},
        "prior": {"kind": "ma2-triangle"},
        "semiauto": {"basis": "poly4"},
        "oracle": {"resolution": 200},
    },
}


def default_config(model: str = "ma2") -> dict:
    if model not in _MODEL_DEFAULTS:
        raise UsageError(f"unknown model {model!r}; choose from {sorted(_MODEL_DEFAULTS)}")
    cfg = copy.deepcopy(_COMMON)
    cfg.update(copy.deepcopy(_MODEL_DEFAULTS[model]))
    return cfg


def _merge(base: dict, update: dict, prefix: str = "") -> dict:
    for key, value in update.items():
        name = f"{prefix}{key}"
        if key not in base:
            raise UsageError(f"unknown config field {name!r}")
        if isinstance(base[key], dict) and key != "model":
            if not isinstance(value, dict):
                raise UsageError(f"config field {name!r} must be a table")
            _merge(base[key], value, name + ".")
        else:
            base[key] = value
    return base


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(cfg: dict, assignment: str) -> None:
    key, sep, value = assignment.partition("=")
    if not sep:
        raise UsageError(f"--set expects key=value, got {assignment!r}")
    *path, leaf = key.split(".")
    node = cfg
    for part in path:
        if not isinstance(node.get(part), dict):
            raise UsageError(f"unknown config field {key!r}")
        node = node[part]
    if leaf not in node:
        raise UsageError(f"unknown config field {key!r}")
    node[leaf] = _parse_value(value)


def resolve_config(path=None, model=None, scale=None, overrides=()) -> dict:
    """Defaults, then the config file, then ``--scale``, then ``--set``."""
    user = {}
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        if not isinstance(user, dict):
            raise UsageError(f"{path}: config must be a JSON object")
    tag = user.get("model", {}).get("model") or model or "ma2"
    if model is not None and tag != model:
        raise UsageError(f"--model {model} disagrees with config model {tag}")
    cfg = _merge(default_config(tag), user)
    if scale is not None:
        if not scale > 0:
            raise UsageError("--scale must be positive")
        for key in ("n_train", "n_val", "n_test"):
            cfg["data"][key] = int(round(cfg["data"][key] * scale))
        cfg["abc"]["n_proposals"] = max(1, int(round(cfg["abc"]["n_proposals"] * scale)))
    for assignment in overrides:
        apply_override(cfg, assignment)
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    for key in ("n_train", "n_val", "n_test"):
        n = cfg["data"][key]
        if not isinstance(n, int) or n < 0:
            raise UsageError(f"data.{key} must be a nonnegative integer")
    if cfg["data"]["n_train"] < 1:
        raise UsageError("data.n_train must be >= 1")
    for key, value in cfg["seeds"].items():
        if not isinstance(value, int) or value < 0:
            raise UsageError(f"seeds.{key} must be a nonnegative integer")
    try:
        model_from_dict(cfg["model"])
        prior_from_dict(cfg["prior"])
    except (TypeError, ValueError) as exc:
        raise UsageError(f"model/prior: {exc}") from None
    train_config(cfg)
    abc_config(cfg)
    try:
        semiauto.CandidateBasis.parse(cfg["semiauto"]["basis"])
    except ValueError as exc:
        raise UsageError(f"semiauto.basis: {exc}") from None


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def train_config(cfg: dict) -> nn.TrainConfig:
    keys = ("epochs", "minibatch_size", "learning_rate", "lr_schedule", "decay_every",
            "decay_factor", "l2_lambda", "early_stopping_patience")
    try:
        return nn.TrainConfig(**{k: cfg["nn"][k] for k in keys}, seed=cfg["seeds"]["train"])
    except (TypeError, ValueError) as exc:
        raise UsageError(f"nn: {exc}") from None


def abc_config(cfg: dict, threads=None) -> AbcConfig:
    a = cfg["abc"]
    try:
        return AbcConfig(int(a["n_proposals"]), float(a["quantile"]), a["epsilon"],
                         a["distance"], cfg["seeds"]["abc"], threads)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"abc: {exc}") from None


# --------------------------------------------------------------------------
# provenance


class Context:
    def __init__(self, args):
        self.cfg = resolve_config(args.config, args.model, args.scale, args.set or ())
        self.hash = config_hash(self.cfg)
        self.force = getattr(args, "force", False)
        self.threads = args.threads
        self.model = model_from_dict(self.cfg["model"])
        self.prior = prior_from_dict(self.cfg["prior"])

    def comments(self, seed) -> list[str]:
        return [f"config_hash={self.hash}", f"seed={seed}"]

    def check(self, source: str, found) -> None:
        if found != self.hash:
            msg = f"{source} was produced under config {found}, current config is {self.hash}"
            if not self.force:
                raise UsageError(msg + " (use --force to proceed anyway)")
            log.warning("%s; continuing because of --force", msg)


def _file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def read_observation(path) -> dict:
    try:
        obs = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read observation {path}: {exc}") from None
    if obs.get("format") != OBS_FORMAT or "x" not in obs:
        raise UsageError(f"{path}: not an observation file")
    return obs


def observation_array(obs: dict, model) -> np.ndarray:
    dtype = np.int8 if model.tag == "ising" else np.float64
    x = np.asarray(obs["x"], dtype=dtype)
    if x.shape != (model.data_dim,):
        raise UsageError(f"observation has {x.size} values, model expects {model.data_dim}")
    return x


def load_summary(ctx: Context, spec: str):
    """A built-in summary name or a checkpoint path; returns (summary, provenance)."""
    if spec == "ising-sufficient":
        return ising_sufficient_summary(), {}
    if spec == "ma2-autocov":
        return ma2_autocov_summary(), {}
    if spec == "exact-posterior-mean":
        if ctx.model.tag != "ising" or ctx.model.m > 4:
            raise UsageError("exact-posterior-mean needs an Ising model with m <= 4")
        return ising_posterior_mean_summary(ctx.model.m, ctx.prior), {}
    try:
        header = nn.checkpoint_header(spec)
    except FileNotFoundError:
        raise UsageError(f"summary {spec!r} is neither a built-in nor an existing file") from None
    ctx.check(spec, header.get("config_hash"))
    if header.get("model_tag") == "mlp":
        s = dnn_summary(nn.load_model(spec))
        p = header["layer_sizes"][0]
    elif header.get("model_tag") == "linear-summary":
        s = linear_summary(semiauto.load_linear_summary(spec))
        p = header.get("p")
    else:
        raise UsageError(f"{spec}: unknown summary model tag {header.get('model_tag')!r}")
    if p != ctx.model.data_dim:
        raise UsageError(f"{spec}: summary expects {p} inputs, model produces {ctx.model.data_dim}")
    return s, {"summary_file_sha256": _file_sha256(spec)}


def read_draws(path) -> tuple[dict, np.ndarray]:
    try:
        comments, header, rows = ev.read_table(path)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read draws {path}: {exc}") from None
    if header[:1] != ["proposal"] or header[-1:] != ["distance"]:
        raise UsageError(f"{path}: not an ABC draws file")
    if not rows:
        raise EmptyAcceptance(f"{path}: result file holds no accepted draws")
    return comments, np.array([[float(v) for v in r[1:-1]] for r in rows])


def read_exact(path) -> tuple[dict, ev.PosteriorMoments]:
    try:
        comments, header, rows = ev.read_table(path)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read exact moments {path}: {exc}") from None
    if header != ev.TABLE3_COLUMNS or not rows:
        raise UsageError(f"{path}: not an exact-moments file")
    row = rows[0]
    cor = None if row[5] == ev.UNDEFINED else float(row[5])
    return comments, ev.PosteriorMoments(np.array([float(row[1]), float(row[2])]),
                                         np.array([float(row[3]), float(row[4])]), cor)


# --------------------------------------------------------------------------
# commands


def cmd_simulate(args) -> int:
    ctx = Context(args)
    if args.observed:
        return _simulate_observed(ctx, args)
    if args.out is None:
        raise UsageError("simulate needs --out (or --observed)")
    d = ctx.cfg["data"]
    seed = ctx.cfg["seeds"]["data"]
    ds = simulate_dataset(ctx.model, ctx.prior, (d["n_train"], d["n_val"], d["n_test"]),
                          seed, ctx.threads)
    ds.meta["config_hash"] = ctx.hash
    save_dataset(ds, args.out)
    log.info("wrote %d pairs to %s", len(ds), args.out)
    return EXIT_OK


def _simulate_observed(ctx: Context, args) -> int:
    if args.out is None:
        raise UsageError("simulate --observed needs --out")
    seed = ctx.cfg["seeds"]["obs"]
    gen = RngStream(seed, args.index).generator()
    if args.theta is not None:
        try:
            theta = np.array([float(v) for v in args.theta.split(",")])
        except ValueError:
            raise UsageError(f"cannot parse --theta {args.theta!r}") from None
        if theta.shape != (ctx.prior.dim,):
            raise UsageError(f"--theta needs {ctx.prior.dim} values")
    else:
        theta = ctx.prior.sample(gen)
    x = ctx.model.simulate(theta, gen)
    obs = {
        "format": OBS_FORMAT,
        "model": ctx.model.to_dict(),
        "theta": [float(t) for t in theta],
        "x": x.tolist(),
        "seed": seed,
        "stream": args.index,
        "config_hash": ctx.hash,
    }
    Path(args.out).write_text(json.dumps(obs, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_train(args) -> int:
    ctx = Context(args)
    try:
        ds = load_dataset(args.data)
    except DatasetFormatError as exc:
        raise UsageError(str(exc)) from None
    ctx.check(args.data, ds.meta.get("config_hash"))
    if ds.model_tag != ctx.model.tag or ds.p != ctx.model.data_dim:
        raise UsageError(f"{args.data} holds {ds.model_tag} data with p={ds.p}, "
                         f"config describes {ctx.model.tag} with p={ctx.model.data_dim}")
    seeds = ctx.cfg["seeds"]
    meta = {"config_hash": ctx.hash, "training_set_hash": ds.digest(),
            "method": args.method, "p": ds.p}
    if args.method == "semiauto":
        basis = semiauto.CandidateBasis.parse(ctx.cfg["semiauto"]["basis"])
        fit = pipelines.fit_semiauto(ds, basis)
        semiauto.save_linear_summary(fit.model, args.out, seed=seeds["data"], **meta)
        seed = seeds["data"]
    else:
        tc = train_config(ctx.cfg)
        hidden = ctx.cfg["nn"]["hidden" if args.method == "dnn" else "ffnn_hidden"]
        label = f"{args.method.upper()}, lambda={tc.l2_lambda:g}"
        fit = pipelines.fit_network(ds, hidden, tc, label, init_seed=seeds["init"], log=log.info)
        nn.save_model(fit.model, args.out, l2_lambda=tc.l2_lambda, seed=tc.seed,
                      init_seed=seeds["init"], **meta)
        seed = tc.seed
        if args.report:
            fit.report.write_csv(args.report, ctx.comments(seed))
    if args.table:
        cols = ev.TABLE1_COLUMNS if ds.q == 1 else ev.TABLE2_COLUMNS
        ev.write_table(args.table, cols, [fit.table_row()], ctx.comments(seed))
    for name, v in (("train", fit.train_rmse), ("test", fit.test_rmse)):
        print(f"{fit.label}: {name} RMSE " + " ".join(f"{r:.4f}" for r in v))
    return EXIT_OK


def cmd_abc(args) -> int:
    ctx = Context(args)
    obs = read_observation(args.obs)
    ctx.check(args.obs, obs.get("config_hash"))
    x = observation_array(obs, ctx.model)
    cfg = abc_config(ctx.cfg, ctx.threads)
    if args.summary == "exact-match":
        n = math.ceil(round(cfg.quantile * cfg.n_proposals, 9))
        res = abc_reject_exact(ctx.prior, ctx.model, x, n, cfg.seed,
                               budget=int(ctx.cfg["abc"]["budget"]), threads=ctx.threads)
        res.meta["summary"] = "exact-match"
        extra = {}
    else:
        summary, extra = load_summary(ctx, args.summary)
        res = abc_reject_summary(ctx.prior, ctx.model, summary, x, cfg)
    res.write_csv(args.out, ctx.comments(cfg.seed))
    sidecar = args.sidecar or str(Path(args.out).with_suffix(".json"))
    res.write_sidecar(sidecar, config_hash=ctx.hash, observation_sha256=_file_sha256(args.obs),
                      observation_theta=obs.get("theta"), **extra)
    print(f"accepted {res.n_accepted} of {res.n_proposed} "
          f"(epsilon {res.realized_epsilon:.6g}, {res.distance_mode})")
    if res.status == "empty":
        raise EmptyAcceptance("no proposal fell within the tolerance")
    return EXIT_OK


def cmd_oracle(args) -> int:
    ctx = Context(args)
    obs = None
    if args.obs is not None:
        obs = read_observation(args.obs)
        ctx.check(args.obs, obs.get("config_hash"))
    if ctx.model.tag == "ma2":
        if obs is None:
            raise UsageError("the MA(2) oracle needs --obs")
        x = observation_array(obs, ctx.model)
        grid = ma2.exact_posterior(x, int(ctx.cfg["oracle"]["resolution"]))
        mom = grid.moments()
        comments = ctx.comments(obs.get("seed"))
        ev.write_table(args.out, ev.TABLE3_COLUMNS, [["Exact"] + mom.row()], comments)
        if args.grid:
            grid.write_csv(args.grid, comments)
        print("exact posterior: " + " ".join(f"{c}={v:.4f}" if isinstance(v, float) else f"{c}={v}"
                                             for c, v in zip(ev.MOMENT_COLUMNS, mom.row())))
        return EXIT_OK
    m = ctx.model.m
    if m > 4:
        raise UsageError(f"exact Ising enumeration is limited to m <= 4 (config has m={m})")
    table = ising.posterior_mean_by_stat(m, ctx.prior)
    comments = ctx.comments(None if obs is None else obs.get("seed"))
    if obs is not None:
        s_obs = int(ising.sufficient_stat(observation_array(obs, ctx.model)))
        comments.append(f"observed_S_star={s_obs}")
        print(f"S*(x_obs) = {s_obs}, exact posterior mean = {table[s_obs]:.6f}")
    ev.write_table(args.out, ["S_star", "posterior_mean"],
                   [[int(k), float(v)] for k, v in sorted(table.items())], comments)
    return EXIT_OK


def cmd_eval(args) -> int:
    ctx = Context(args)
    return {"rmse": _eval_rmse, "moments": _eval_moments, "mse": _eval_mse,
            "monotonicity": _eval_monotonicity}[args.kind](ctx, args)


def _load_eval_data(ctx: Context, args):
    try:
        ds = load_dataset(args.data)
    except DatasetFormatError as exc:
        raise UsageError(str(exc)) from None
    ctx.check(args.data, ds.meta.get("config_hash"))
    summary, _ = load_summary(ctx, args.summary)
    return ds, summary


def _eval_rmse(ctx: Context, args) -> int:
    if args.data is None or args.summary is None:
        raise UsageError("eval rmse needs --data and --summary")
    ds, summary = _load_eval_data(ctx, args)
    cols = ["split"] + [f"RMSE theta{j + 1}" for j in range(ds.q)]
    rows = []
    for name in ("train", "validation", "test"):
        if ds.has_split(name):
            part = ds.subset(name)
            rows.append([name, *ev.rmse(summary(part.x), part.theta)])
    ev.write_table(args.out, cols, rows, ctx.comments(ds.seed))
    for r in rows:
        print(r[0], " ".join(f"{v:.4f}" for v in r[1:]))
    return EXIT_OK


def _labelled(groups) -> list[tuple[str, list[str]]]:
    out = []
    for group in groups or ():
        if len(group) < 2:
            raise UsageError("--abc expects a label followed by one or more files")
        out.append((group[0], group[1:]))
    if not out:
        raise UsageError("at least one --abc LABEL FILE... is required")
    return out


def _abc_moments(ctx: Context, path) -> tuple[ev.PosteriorMoments, str]:
    comments, draws = read_draws(path)
    ctx.check(path, comments.get("config_hash"))
    if len(draws) < 2:
        raise EmptyAcceptance(f"{path}: need at least two accepted draws for moments")
    return ev.moments(draws), comments.get("seed")


def _eval_moments(ctx: Context, args) -> int:
    if not args.exact or len(args.exact) != 1:
        raise UsageError("eval moments needs exactly one --exact file")
    comments, exact = read_exact(args.exact[0])
    ctx.check(args.exact[0], comments.get("config_hash"))
    rows = [["Exact"] + exact.row()]
    seed = None
    for label, files in _labelled(args.abc):
        if len(files) != 1:
            raise UsageError("eval moments takes one draws file per label")
        mom, seed = _abc_moments(ctx, files[0])
        rows.append([f"ABC ({label})"] + mom.row())
    ev.write_table(args.out, ev.TABLE3_COLUMNS, rows, ctx.comments(seed))
    return EXIT_OK


def _eval_mse(ctx: Context, args) -> int:
    if not args.exact:
        raise UsageError("eval mse needs --exact files, one per replicate")
    exact = []
    for path in args.exact:
        comments, mom = read_exact(path)
        ctx.check(path, comments.get("config_hash"))
        exact.append(mom)
    rows = []
    for label, files in _labelled(args.abc):
        if len(files) != len(exact):
            raise UsageError(f"--abc {label}: {len(files)} files for {len(exact)} replicates")
        abc = [_abc_moments(ctx, f)[0] for f in files]
        report = ev.replicate_mse(list(zip(exact, abc)))
        rows.append(report.mse_row(f"ABC ({label})"))
    ev.write_table(args.out, ev.TABLE4_COLUMNS, rows,
                   ctx.comments(ctx.cfg["seeds"]["abc"]) + [f"replicates={len(exact)}"])
    return EXIT_OK


def _eval_monotonicity(ctx: Context, args) -> int:
    if ctx.model.tag != "ising":
        raise UsageError("the monotonicity diagnostic needs Ising data")
    if args.data is None or args.summary is None:
        raise UsageError("eval monotonicity needs --data and --summary")
    ds, summary = _load_eval_data(ctx, args)
    part = ds.subset("test") if ds.has_split("test") else ds
    res = ev.monotonicity_diagnostic(summary(part.x)[:, 0], part.x,
                                     exclude_saturated=not args.include_saturated)
    res.write_csv(args.out)
    _prepend_comments(args.out, ctx.comments(ds.seed) + [f"spearman_rho={res.rho!r}",
                                                         f"n_used={res.n_used}"])
    print(f"Spearman rho = {res.rho:.4f} over {res.n_used} test states")
    return EXIT_OK


def _prepend_comments(path, comments) -> None:
    body = Path(path).read_text()
    Path(path).write_text("".join(f"# {c}\n" for c in comments) + body)


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--model", choices=sorted(_MODEL_DEFAULTS),
                        help="built-in defaults to start from (default: ma2)")
    common.add_argument("--scale", type=float,
                        help="multiply dataset sizes and the proposal count")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config field, e.g. nn.epochs=50")
    common.add_argument("--threads", type=int,
                        help="worker threads (default: $DEEPABC_THREADS or 1)")
    common.add_argument("--force", action="store_true",
                        help="accept inputs produced under a different config")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="deepabc", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate a dataset or an observation")
    p.add_argument("--out", help="dataset file, or observation JSON with --observed")
    p.add_argument("--observed", action="store_true", help="simulate one observation")
    p.add_argument("--theta", help="comma-separated true parameter (default: draw from prior)")
    p.add_argument("--index", type=int, default=0, help="observation stream index")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", parents=[common], help="fit a summary statistic")
    p.add_argument("--data", required=True)
    p.add_argument("--method", choices=("dnn", "ffnn", "semiauto"), default="dnn")
    p.add_argument("--out", required=True, help="checkpoint file")
    p.add_argument("--report", help="per-epoch loss CSV")
    p.add_argument("--table", help="RMSE table row CSV")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("abc", parents=[common], help="rejection ABC for one observation")
    p.add_argument("--obs", required=True, help="observation JSON")
    p.add_argument("--summary", required=True,
                   help="checkpoint path or one of " + ", ".join(BUILTIN_SUMMARIES))
    p.add_argument("--out", required=True, help="accepted draws CSV")
    p.add_argument("--sidecar", help="JSON summary of the run (default: OUT with .json)")
    p.set_defaults(func=cmd_abc)

    p = sub.add_parser("oracle", parents=[common], help="exact posterior reference")
    p.add_argument("--obs", help="observation JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--grid", help="MA(2): also write the posterior grid")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("eval", parents=[common], help="metric tables")
    p.add_argument("kind", choices=("rmse", "moments", "mse", "monotonicity"))
    p.add_argument("--data")
    p.add_argument("--summary")
    p.add_argument("--exact", nargs="+", help="exact-moment CSVs from `oracle`")
    p.add_argument("--abc", nargs="+", action="append", metavar="LABEL FILE",
                   help="label followed by draws CSVs (repeatable)")
    p.add_argument("--include-saturated", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"deepabc {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetFormatError, nn.CheckpointError) as exc:
        print(f"deepabc {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (nn.TrainingDiverged, ma2.NotPositiveDefiniteError, AbcBudgetExceeded,
            FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"deepabc {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except EmptyAcceptance as exc:
        print(f"deepabc {args.command}: empty acceptance: {exc}", file=sys.stderr)
        return EXIT_EMPTY


if __name__ == "__main__":
    sys.exit(main())
