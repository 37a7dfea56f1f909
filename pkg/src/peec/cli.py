"""Command-line entry point: every pipeline stage as a subcommand.

Configuration is layered: embedded defaults, then an optional JSON file
(``--config``), then flags.  Flags win.  ``--print-config`` dumps the
effective configuration and exits.  Each invocation writes into one run
directory, which always receives ``config.json`` with the effective
configuration and ``log.txt``; feeding that ``config.json`` back in
reproduces the run.

Exit codes: 0 success, 1 audit verdict FAIL, 2 usage error, 3 data error,
4 numeric failure, 5 network error.  Failures print a single line to
stderr of the form ``error code=<n> kind=<kind> key=<key> msg=<json string>``.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import baselines, corpus as corpus_mod, edgecloud, evaluate, model as model_mod
from .corpus import DEFAULT_SNR, CorpusError, LabelColumns
from .tensor import NonFiniteError, ShapeError

log = logging.getLogger("peec")

RUN_ROOT_ENV = "PEEC_RUN_ROOT"
GRADCHECK_LIMIT = 1e-4

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC, EXIT_NETWORK = 0, 1, 2, 3, 4, 5


class CliError(Exception):
    code = EXIT_USAGE
    kind = "usage"

    def __init__(self, msg: str, key: str | None = None):
        super().__init__(msg)
        self.key = key


class UsageError(CliError):
    pass


class DataError(CliError):
    code, kind = EXIT_DATA, "data"


class NumericError(CliError):
    code, kind = EXIT_NUMERIC, "numeric"


class NetError(CliError):
    code, kind = EXIT_NETWORK, "network"


# -- configuration ---------------------------------------------------------

def _train_defaults(preset: str) -> dict:
    cfg = model_mod.desk_config() if preset == "desk" else model_mod.TrainConfig()
    d = cfg.to_dict()
    d.pop("seed")
    return d


def _eval_defaults(preset: str) -> dict:
    cfg = evaluate.desk_eval_config() if preset == "desk" else evaluate.EvalConfig()
    d = asdict(cfg)
    d.pop("seed")
    d["grid_C"], d["grid_gamma"] = list(cfg.grid_C), list(cfg.grid_gamma)
    return d


def default_config(preset: str = "paper") -> dict:
    """Embedded defaults.  ``preset`` picks the training/evaluation scale.

    ``paper`` keeps the full architecture (2000/1000 hidden units, latent 512,
    five LOSO repeats); ``desk`` is the reduced setup that finishes on a CPU
    in minutes.
    """
    if preset not in ("paper", "desk"):
        raise UsageError(f"unknown preset {preset!r} (expected paper or desk)", "preset")
    return {
        "preset": preset,
        "seed": 0,
        "data": {"corpus": None, "corpus_name": None, "valence": "valence", "speaker": "speaker",
                 "gender": "gender", "language": "language", "id": "id", "pooling": "pool"},
        "synth": {"n_per_cell": 30, "dim": 512, "n_speakers": 8, "n_languages": 2,
                  "snr": dict(DEFAULT_SNR), "format": "csv"},
        "train": _train_defaults(preset),
        "eval": _eval_defaults(preset),
        "methods": list(evaluate.METHODS),
        "sweep": {"latent_dims": [32, 64, 128, 256, 512], "emotion": True},
        "paths": {"model": None, "svm": None, "capture": None},
        "services": {"edge_listen": "127.0.0.1:7101", "cloud_listen": "127.0.0.1:7102",
                     "tap_listen": "127.0.0.1:7103", "edge_addr": "127.0.0.1:7101",
                     "cloud_addr": "127.0.0.1:7102", "rate_limit": 0.0, "timeout": 30.0,
                     "passthrough": False},
        "audit": {"raw_dim": None, "latent_dim": None, "attack_attribute": None},
        "gradcheck": {"trials": 3, "input_dim": 20, "epsilon": 1e-5},
    }


def _type_ok(default, value) -> bool:
    if default is None or value is None:
        return True
    if isinstance(default, bool):
        return isinstance(value, bool)
    if isinstance(default, float):
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if isinstance(default, int):
        return isinstance(value, int) and not isinstance(value, bool)
    if isinstance(default, (list, tuple)):
        return isinstance(value, (list, tuple))
    return isinstance(value, type(default))


def merge_config(base: dict, override: dict, prefix: str = "") -> dict:
    """Recursive merge; unknown keys and wrongly typed values are usage errors."""
    out = copy.deepcopy(base)
    for k, v in override.items():
        key = f"{prefix}{k}"
        if k not in out:
            raise UsageError(f"unknown config key {key!r}", key)
        if isinstance(out[k], dict):
            if not isinstance(v, dict):
                raise UsageError(f"config key {key!r} must be an object", key)
            if k == "snr":  # free-form amplitudes, validated by the generator
                out[k].update(v)
            else:
                out[k] = merge_config(out[k], v, key + ".")
        else:
            if not _type_ok(out[k], v):
                raise UsageError(f"config key {key!r} expects {type(out[k]).__name__}, got {v!r}", key)
            out[k] = v
    return out


def _set_path(tree: dict, dotted: str, value) -> dict:
    node: dict = {}
    root = node
    parts = dotted.split(".")
    for p in parts[:-1]:
        node[p] = {}
        node = node[p]
    node[parts[-1]] = value
    return root


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def train_config(cfg: dict) -> model_mod.TrainConfig:
    try:
        return model_mod.TrainConfig(seed=cfg["seed"], **cfg["train"])
    except (TypeError, ValueError) as e:
        raise UsageError(f"invalid train config: {e}", "train") from None


def eval_config(cfg: dict) -> evaluate.EvalConfig:
    try:
        return evaluate.EvalConfig(seed=cfg["seed"], **cfg["eval"])
    except (TypeError, ValueError) as e:
        raise UsageError(f"invalid eval config: {e}", "eval") from None


# flag name -> dotted config key
FLAG_KEYS = {
    "seed": "seed",
    "corpus": "data.corpus",
    "model": "paths.model",
    "svm": "paths.svm",
    "capture": "paths.capture",
    "epochs": "train.epochs",
    "latent_dim": "train.latent_dim",
    "alpha": "train.alpha",
    "lr": "train.lr",
    "repeats": "eval.repeats",
    "listen": None,  # service-specific, resolved per subcommand
    "cloud": "services.cloud_addr",
    "edge": "services.edge_addr",
    "rate_limit": "services.rate_limit",
    "raw_dim": "audit.raw_dim",
    "attack_attribute": "audit.attack_attribute",
}
LISTEN_KEYS = {"serve-edge": "services.edge_listen", "serve-cloud": "services.cloud_listen",
               "serve-tap": "services.tap_listen"}


def effective_config(args) -> dict:
    preset = "paper"
    file_cfg = {}
    if args.config:
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except OSError as e:
            raise DataError(f"cannot read config file: {e}", "config") from None
        except json.JSONDecodeError as e:
            raise DataError(f"config file is not valid JSON: {e}", "config") from None
        if not isinstance(file_cfg, dict):
            raise DataError("config file must hold a JSON object", "config")
        preset = file_cfg.get("preset", preset)
    if args.preset:
        preset = args.preset
    cfg = default_config(preset)
    cfg = merge_config(cfg, {k: v for k, v in file_cfg.items() if k != "preset"})
    for name, key in FLAG_KEYS.items():
        value = getattr(args, name, None)
        if value is None:
            continue
        if name == "listen":
            key = LISTEN_KEYS[args.command]
        if name == "latent_dim" and args.command == "audit":
            key = "audit.latent_dim"
        cfg = merge_config(cfg, _set_path({}, key, value))
    if getattr(args, "passthrough", False):
        cfg["services"]["passthrough"] = True
    for item in args.set or []:
        key, sep, raw = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {item!r}", key)
        cfg = merge_config(cfg, _set_path({}, key.strip(), _parse_value(raw)))
    return cfg


def run_dir_for(args, cfg: dict) -> Path:
    if args.run_dir:
        return Path(args.run_dir)
    root = Path(os.environ.get(RUN_ROOT_ENV, "runs"))
    digest = hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:10]
    return root / f"{args.command}-{digest}"


# -- helpers ---------------------------------------------------------------

def _require(cfg: dict, dotted: str):
    node = cfg
    for p in dotted.split("."):
        node = node[p]
    if node is None:
        raise UsageError(f"{dotted} is required (set it in the config or with a flag)", dotted)
    return node


def _existing(path, key: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"file not found: {p}", key)
    return p


def _load_corpora(cfg: dict) -> list:
    """Every configured corpus file, named by file stem (or position when stems clash)."""
    d = cfg["data"]
    paths = _require(cfg, "data.corpus")
    paths = [paths] if isinstance(paths, str) else list(paths)
    if not paths:
        raise UsageError("data.corpus is an empty list", "data.corpus")
    names = d["corpus_name"]
    names = [names] * len(paths) if names is None or isinstance(names, str) else list(names)
    if len(names) != len(paths):
        raise UsageError(f"data.corpus_name lists {len(names)} names for {len(paths)} corpora", "data.corpus_name")
    out = []
    for path, cname in zip(paths, names):
        cols = LabelColumns(valence=d["valence"], speaker=d["speaker"], gender=d["gender"],
                            language=d["language"], id=d["id"], corpus_name=cname)
        c = corpus_mod.load_corpus(_existing(path, "data.corpus"), cols)
        out.append(c)
    stems = [Path(p).stem for p in paths]
    if len(set(stems)) != len(stems):
        stems = [f"c{i}" for i in range(len(paths))]
    return list(zip(stems, out))


def _load_corpus(cfg: dict):
    """The configured corpus; several files are pooled into one."""
    named = _load_corpora(cfg)
    if len(named) == 1:
        return named[0][1]
    return corpus_mod.concat_corpora([c for _, c in named], [n for n, _ in named])


def _eval_corpora(cfg: dict) -> list:
    """Corpora to evaluate separately: one pooled corpus, or each file when averaging."""
    if cfg["data"]["pooling"] not in ("pool", "average"):
        raise UsageError(f"data.pooling must be pool or average, got {cfg['data']['pooling']!r}", "data.pooling")
    if cfg["data"]["pooling"] == "average":
        return _load_corpora(cfg)
    return [("all", _load_corpus(cfg))]


def _write(run: Path, name: str, text: str) -> Path:
    path = run / name
    path.write_text(text, encoding="utf-8")
    log.info("wrote %s", path)
    return path


def _emit(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")
    sys.stdout.flush()


def _history_csv(history) -> str:
    if not history.epochs:
        return "epoch\n"
    keys = ["epoch"] + [k for k in history.epochs[0] if k != "epoch"]
    lines = [",".join(keys)]
    for e in history.epochs:
        lines.append(",".join(str(e[k]) if k == "epoch" else f"{e[k]:.10g}" for k in keys))
    return "\n".join(lines) + "\n"


def _matrix_csv(ids, Z, prefix: str) -> str:
    head = ["id"] + [f"{prefix}{j}" for j in range(Z.shape[1])]
    lines = [",".join(head)]
    for rid, row in zip(ids, Z):
        lines.append(",".join([rid] + [repr(float(v)) for v in row]))
    return "\n".join(lines) + "\n"


def _method_list(cfg: dict, args) -> list[str]:
    methods = [args.method] if getattr(args, "method", None) else list(cfg["methods"])
    for m in methods:
        if m not in evaluate.METHODS:
            raise UsageError(f"unknown method {m!r} (expected one of {', '.join(evaluate.METHODS)})", "methods")
    return methods


# -- subcommands -----------------------------------------------------------

def cmd_synth(cfg, args, run: Path) -> int:
    s = cfg["synth"]
    try:
        c = corpus_mod.synth_corpus(s["n_per_cell"], s["dim"], s["n_speakers"], s["n_languages"],
                                    s["snr"], seed=cfg["seed"])
    except ValueError as e:
        raise UsageError(str(e), "synth") from None
    ext = "arff" if s["format"] == "arff" else "csv"
    path = run / f"corpus.{ext}"
    corpus_mod.save_corpus(c, path)
    _emit(f"synthetic corpus: {len(c)} utterances, {len(c.speakers)} speakers, dim {c.dim} -> {path}")
    return EXIT_OK


def _fit_cloud_svm(m, c, ecfg: evaluate.EvalConfig):
    """Cloud classifier trained on the encoder's latents of the training rows."""
    Z = np.vstack([edgecloud.edge_encode(m, x) for x in c.X])
    Z = Z.astype(np.float32).astype(np.float64)
    y = np.where(c.labels("valence") == "POS", 1, -1)
    C, gamma = evaluate.grid_search(Z, y, ecfg.grid_C, ecfg.grid_gamma, ecfg.seed, ecfg.val_fraction, ecfg.svm_tol)
    return evaluate.svm_train_smo(Z, y, C, gamma, ecfg.svm_tol)


def cmd_train(cfg, args, run: Path) -> int:
    c = _load_corpus(cfg)
    tcfg = train_config(cfg)
    m, history = model_mod.fit_encoder(c, np.arange(len(c)), tcfg)
    model_mod.save(m, run / "model.peec")
    _write(run, "history.csv", _history_csv(history))
    svm = _fit_cloud_svm(m, c, eval_config(cfg))
    evaluate.save_svm(svm, run / "svm.npz")
    last = history.epochs[-1] if history.epochs else {}
    _emit(f"trained {tcfg.epochs} epochs on {len(c)} utterances; "
          + " ".join(f"{k}={last[k]:.4f}" for k in ("recon", "speaker", "gender", "language") if k in last)
          + f"; cloud SVM C={svm.C:g} gamma={svm.gamma:g} with {len(svm.dual_coef)} support vectors")
    return EXIT_OK


def cmd_encode(cfg, args, run: Path) -> int:
    c = _load_corpus(cfg)
    m = model_mod.load(_existing(_require(cfg, "paths.model"), "paths.model"))
    if c.dim != m.dim:
        raise DataError(f"corpus dim {c.dim} does not match model input dim {m.dim}", "data.corpus")
    Z = m.encode_raw(c.X)
    _write(run, "latents.csv", _matrix_csv(c.ids, Z, "z"))
    _emit(f"encoded {len(c)} utterances to dim {Z.shape[1]}")
    return EXIT_OK


def cmd_pca(cfg, args, run: Path) -> int:
    c = _load_corpus(cfg)
    scaler = corpus_mod.fit_minmax(c)
    Xn = corpus_mod.apply_minmax(scaler, c.X)
    k = min(cfg["train"]["latent_dim"], Xn.shape[0] - 1, Xn.shape[1])
    pm = baselines.pca_fit(Xn, k)
    np.savez(run / "pca.npz", mean=pm.mean, components=pm.components, eigenvalues=pm.eigenvalues,
             scaler_min=scaler.min, scaler_max=scaler.max)
    _write(run, "pca_scores.csv", _matrix_csv(c.ids, baselines.pca_transform(pm, Xn), "pc"))
    explained = pm.eigenvalues.sum() / max(np.var(Xn, axis=0, ddof=1).sum(), 1e-300)
    _emit(f"PCA k={k}: {explained:.1%} of variance retained")
    return EXIT_OK


def cmd_eval_loso(cfg, args, run: Path) -> int:
    corpora = _eval_corpora(cfg)
    tcfg, ecfg = train_config(cfg), eval_config(cfg)
    rows = []
    for method in _method_list(cfg, args):
        uars, folds, reps = [], 0, 0
        for name, c in corpora:
            audit = evaluate.FitAudit()
            res = evaluate.evaluate_loso(c, method, ecfg.repeats, ecfg, tcfg, audit)
            bad = audit.violations(res.test_ids)
            if bad:
                raise DataError(f"{method}: {len(bad)} train-side fits saw test-speaker rows", "eval")
            tag = method if len(corpora) == 1 else f"{method}_{name}"
            for r, cm in enumerate(res.confusions):
                _write(run, f"confusion_{tag}_r{r}.csv", evaluate.confusion_csv(cm))
            uars.append(res.uar)
            folds += res.n_folds
            reps = len(res.per_repeat)
        uar = float(np.mean(uars))
        rows.append({"method": method, "uar": uar, "folds": folds, "repeats": reps, "audit_violations": 0})
        _emit(f"{method:10s} UAR {uar:.4f} over {folds} folds x {reps} repeats")
    _write(run, "loso.csv", evaluate.write_rows_csv(rows, ["method", "uar", "folds", "repeats", "audit_violations"]))
    return EXIT_OK


def cmd_attack(cfg, args, run: Path) -> int:
    corpora = _eval_corpora(cfg)
    tcfg, ecfg = train_config(cfg), eval_config(cfg)
    cols = ["gender_acc", "member_acc", "language_acc"]
    rows = []
    for method in _method_list(cfg, args):
        per = [evaluate.privacy_attacks(c, method, tcfg, ecfg) for _, c in corpora]
        res = {k: float(np.mean([p[k] for p in per])) for k in cols}
        rows.append({"method": method, **res})
        _emit(f"{method:10s} gender {res['gender_acc']:.4f}  member {res['member_acc']:.4f}  "
              f"language {res['language_acc']:.4f}")
    _write(run, "attacks.csv", evaluate.write_rows_csv(rows, ["method", *cols]))
    return EXIT_OK


def cmd_report(cfg, args, run: Path) -> int:
    methods = _method_list(cfg, args)
    reports = [evaluate.build_report(c, train_config(cfg), eval_config(cfg), methods) for _, c in _eval_corpora(cfg)]
    report = evaluate.average_reports(reports)
    _write(run, "report.csv", report.to_csv())
    _write(run, "report.txt", report.to_text())
    _emit(report.to_text())
    return EXIT_OK


def cmd_sweep(cfg, args, run: Path) -> int:
    c = _load_corpus(cfg)
    rows = model_mod.latent_sweep(c, cfg["sweep"]["latent_dims"], train_config(cfg), eval_config(cfg),
                                  emotion=cfg["sweep"]["emotion"])
    cols = ["latent_dim", *evaluate.REPORT_COLUMNS]
    _write(run, "sweep.csv", evaluate.write_rows_csv(rows, cols))
    for r in rows:
        _emit(" ".join(f"{k}={r[k]:.4f}" if isinstance(r[k], float) else f"{k}={r[k]}" for k in cols))
    return EXIT_OK


def cmd_serve_cloud(cfg, args, run: Path) -> int:
    svm = evaluate.load_svm(_existing(_require(cfg, "paths.svm"), "paths.svm"))
    _emit(f"cloud listening on {cfg['services']['cloud_listen']} (latent dim {svm.dim})")
    edgecloud._run_blocking(edgecloud.CloudService(svm, cfg["services"]["cloud_listen"]))
    return EXIT_OK


def cmd_serve_edge(cfg, args, run: Path) -> int:
    m = model_mod.load(_existing(_require(cfg, "paths.model"), "paths.model"))
    s = cfg["services"]
    mode = " [PASSTHROUGH: raw features forwarded]" if s["passthrough"] else ""
    _emit(f"edge listening on {s['edge_listen']} -> cloud {s['cloud_addr']}{mode}")
    edgecloud._run_blocking(edgecloud.EdgeService(m, s["cloud_addr"], s["edge_listen"], passthrough=s["passthrough"]))
    return EXIT_OK


def cmd_serve_tap(cfg, args, run: Path) -> int:
    s = cfg["services"]
    capture = run / "capture.bin"
    _emit(f"tap listening on {s['tap_listen']} -> {s['cloud_addr']}, recording to {capture}")
    edgecloud._run_blocking(edgecloud.TapProxy(s["cloud_addr"], capture, s["tap_listen"]))
    return EXIT_OK


def cmd_send(cfg, args, run: Path) -> int:
    c = _load_corpus(cfg)
    s = cfg["services"]
    transcript = edgecloud.run_sensor(c, s["edge_addr"], s["rate_limit"], s["timeout"])
    transcript.to_csv(run / "transcript.csv")
    n_err = len(transcript.errors)
    _emit(f"sent {len(c)} utterances to {s['edge_addr']}: {len(transcript) - n_err} predictions, {n_err} errors")
    if n_err and all(r.error.startswith("network:") for r in transcript.errors):
        raise NetError(f"{n_err} utterance(s) failed on the network; first: {transcript.errors[0].error}",
                       "services.edge_addr")
    return EXIT_OK


def cmd_audit(cfg, args, run: Path) -> int:
    capture = _require(cfg, "paths.capture")
    a = cfg["audit"]
    D = a["raw_dim"] if a["raw_dim"] is not None else cfg["synth"]["dim"]
    L = a["latent_dim"] if a["latent_dim"] is not None else cfg["train"]["latent_dim"]
    verdict = edgecloud.audit_leakage(capture, D, L)
    result = {"verdict": verdict.label, "frames": verdict.n_frames, "counts": verdict.counts,
              "raw_dim_frames": verdict.raw_dim_frames, "latent_frames": verdict.latent_frames,
              "problems": verdict.problems, "raw_dim": D, "latent_dim": L}
    if a["attack_attribute"] and verdict.latent_frames:
        c = _load_corpus(cfg)
        result["attack_accuracy"] = edgecloud.captured_attack(verdict, c, a["attack_attribute"], seed=cfg["seed"])
    _write(run, "audit.json", json.dumps(result, indent=2, sort_keys=True) + "\n")
    _emit(verdict.summary())
    for p in verdict.problems[:10]:
        _emit(f"  {p}")
    if "attack_accuracy" in result:
        _emit(f"  {a['attack_attribute']} attack on captured latents: {result['attack_accuracy']:.4f}")
    return EXIT_OK if verdict.passed else EXIT_FAIL


def cmd_gradcheck(cfg, args, run: Path) -> int:
    g = cfg["gradcheck"]
    lines = ["trial,case,max_rel_error"]
    worst = 0.0
    for t in range(g["trials"]):
        for name, err in model_mod.gradcheck_suite(seed=cfg["seed"] + t, input_dim=g["input_dim"],
                                                   epsilon=g["epsilon"]):
            lines.append(f"{t},{name},{err:.6e}")
            worst = max(worst, err)
    _write(run, "gradcheck.csv", "\n".join(lines) + "\n")
    _emit(f"max relative error {worst:.3e} (limit {GRADCHECK_LIMIT:g})")
    if not worst < GRADCHECK_LIMIT:
        raise NumericError(f"gradient check failed: max relative error {worst:.3e} >= {GRADCHECK_LIMIT:g}",
                           "gradcheck")
    return EXIT_OK


COMMANDS = {
    "synth": (cmd_synth, "generate a synthetic corpus"),
    "train": (cmd_train, "train the privacy encoder and the cloud SVM"),
    "encode": (cmd_encode, "encode a corpus with a trained model"),
    "pca": (cmd_pca, "fit the PCA baseline"),
    "eval-loso": (cmd_eval_loso, "leave-one-speaker-out emotion UAR"),
    "attack": (cmd_attack, "gender, membership and language attacks"),
    "report": (cmd_report, "four-method utility/privacy table"),
    "sweep": (cmd_sweep, "latent-size sweep of the adversarial model"),
    "serve-edge": (cmd_serve_edge, "run the edge encoder service"),
    "serve-cloud": (cmd_serve_cloud, "run the cloud classifier service"),
    "serve-tap": (cmd_serve_tap, "record the edge->cloud link"),
    "send": (cmd_send, "stream a corpus through the edge"),
    "audit": (cmd_audit, "check a capture for raw-feature leakage"),
    "gradcheck": (cmd_gradcheck, "finite-difference gradient check"),
}


# -- argument parsing ------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        key = None
        if message.startswith("unrecognized arguments:"):
            key = message.split(":", 1)[1].split()[0]
        elif message.startswith("argument "):
            key = message.split()[1].rstrip(":").split("/")[-1]
        raise UsageError(message, key)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--preset", choices=("paper", "desk"), help="default scale (paper or desk)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override any config key, e.g. --set train.epochs=20 (repeatable)")
    common.add_argument("--run-dir", help=f"output directory (default ${RUN_ROOT_ENV}/<command>-<hash>)")
    common.add_argument("--print-config", action="store_true", help="print the effective config and exit")
    common.add_argument("--seed", type=int)
    common.add_argument("--corpus", help="input corpus (.csv or .arff)")
    common.add_argument("--model", help="trained model file")
    common.add_argument("--svm", help="trained SVM file")
    common.add_argument("--capture", help="capture file for audit")
    common.add_argument("--epochs", type=int)
    common.add_argument("--latent-dim", type=int)
    common.add_argument("--alpha", type=float)
    common.add_argument("--lr", type=float)
    common.add_argument("--repeats", type=int)
    common.add_argument("--method", help="restrict to one method")
    common.add_argument("--listen", help="host:port to listen on")
    common.add_argument("--cloud", help="cloud (or tap) address for the edge and tap")
    common.add_argument("--edge", help="edge address for send")
    common.add_argument("--rate-limit", type=float, help="utterances per second, 0 = unpaced")
    common.add_argument("--raw-dim", type=int, help="raw feature dimension for audit")
    common.add_argument("--attack-attribute", choices=("gender", "language"),
                        help="also attack captured latents (audit)")
    common.add_argument("--passthrough", action="store_true",
                        help="negative control: edge forwards raw features (serve-edge)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="peec", description="Privacy-enhanced emotion recognition pipeline.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text, description=help_text)
    return parser


def _classify(exc: BaseException) -> CliError:
    if isinstance(exc, CliError):
        return exc
    if isinstance(exc, (NonFiniteError, FloatingPointError)):
        return NumericError(str(exc))
    if isinstance(exc, (edgecloud.NetworkError, ConnectionError, TimeoutError)):
        return NetError(str(exc))
    if isinstance(exc, (CorpusError, model_mod.ModelFormatError, edgecloud.AuditError, ShapeError,
                        FileNotFoundError, UnicodeDecodeError)):
        return DataError(str(exc))
    if isinstance(exc, OSError):
        return DataError(str(exc))
    if isinstance(exc, ValueError):
        return DataError(str(exc))
    raise exc


def _error_line(err: CliError) -> str:
    return f"error code={err.code} kind={err.kind} key={err.key or '-'} msg={json.dumps(str(err))}"


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("a subcommand is required: " + ", ".join(COMMANDS))
        if args.listen is not None and args.command not in LISTEN_KEYS:
            raise UsageError(f"--listen applies only to {', '.join(LISTEN_KEYS)}", "listen")
        cfg = effective_config(args)
        if args.print_config:
            _emit(json.dumps(cfg, indent=2, sort_keys=True))
            return EXIT_OK
        run = run_dir_for(args, cfg)
        run.mkdir(parents=True, exist_ok=True)
        (run / "config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
        handler = logging.FileHandler(run / "log.txt", mode="w")
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
        root = logging.getLogger()
        root.addHandler(handler)
        root.setLevel(logging.DEBUG if args.verbose else logging.INFO)
        try:
            return COMMANDS[args.command][0](cfg, args, run)
        finally:
            root.removeHandler(handler)
            handler.close()
    except KeyboardInterrupt:
        return EXIT_OK
    except Exception as exc:  # every failure leaves as one machine-readable line
        err = _classify(exc)
        sys.stderr.write(_error_line(err) + "\n")
        return err.code


if __name__ == "__main__":
    sys.exit(main())
