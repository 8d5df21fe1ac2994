"""Experiment harness: stream ingestion, configuration, execution, artifacts.

Stream file formats
-------------------
JSONL, one round per line, reduced form (canonical):

    {"p": [0.2, 0.6]}

or full form, reduced at ingestion by selecting the realized symbol's column
(``x`` is 1-based):

    {"dists": [[0.2, 0.8], [0.6, 0.4]], "x": 1}

CSV: header row required, then one column of probabilities per expert.

Artifacts are deterministic byte-for-byte given the same config and seed: no
timestamps, floats rendered by ``repr``, JSON keys sorted.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .comparators import (
    BOUND_SLACK,
    SegmentSpec,
    best_fixed_mixture,
    best_single_expert,
    regret_report,
    shifting_best,
    theoretical_bound,
)
from .core import ExpertStream
from .generators import RNG_NAME, parse_generator
from .learners import (
    Bayes,
    ExponentiatedGradient,
    LearnerTrace,
    MetaBayes,
    MLSoftBayes,
    OnlineGradientDescent,
    SoftBayes,
    run_learner,
)
from .rates import BestSetTracker, ScheduleConfig, parse_schedule

LN2 = math.log(2.0)


class ConfigError(ValueError):
    pass


class StreamFormatError(ValueError):
    pass


# ----------------------------------------------------------------- streams

def _reduce_full_round(obj, lineno):
    dists = obj.get("dists")
    x = obj.get("x")
    if not isinstance(dists, list) or not dists or not isinstance(x, int):
        raise StreamFormatError(f"line {lineno}: full round needs 'dists' and integer 'x'")
    alphabet = len(dists[0]) if isinstance(dists[0], list) else 0
    if not 1 <= x <= alphabet:
        raise StreamFormatError(f"line {lineno}: symbol x={x} outside [1, {alphabet}]")
    try:
        return [float(d[x - 1]) for d in dists]
    except (TypeError, IndexError) as exc:
        raise StreamFormatError(f"line {lineno}: malformed 'dists': {exc}") from exc


def read_stream_jsonl(text: str) -> ExpertStream:
    rounds = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise StreamFormatError(f"line {lineno}: invalid JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise StreamFormatError(f"line {lineno}: expected an object per line")
        if "p" in obj:
            row = obj["p"]
            if not isinstance(row, list):
                raise StreamFormatError(f"line {lineno}: 'p' must be a list")
        elif "dists" in obj:
            row = _reduce_full_round(obj, lineno)
        else:
            raise StreamFormatError(f"line {lineno}: round needs 'p' or 'dists'+'x'")
        try:
            values = [float(v) for v in row]
        except (TypeError, ValueError) as exc:
            raise StreamFormatError(f"line {lineno}: non-numeric probability: {exc}") from exc
        if rounds and len(values) != len(rounds[0]):
            raise StreamFormatError(
                f"line {lineno}: expected {len(rounds[0])} experts, got {len(values)}")
        rounds.append(values)
    if not rounds:
        raise StreamFormatError("stream file contains no rounds")
    try:
        return ExpertStream(np.asarray(rounds, dtype=float))
    except ValueError as exc:
        raise StreamFormatError(str(exc)) from exc


def read_stream_csv(text: str) -> ExpertStream:
    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader if row]
    if len(rows) < 2:
        raise StreamFormatError("CSV stream needs a header row plus at least one round")
    header = rows[0]
    try:
        [float(cell) for cell in header]
    except ValueError:
        pass
    else:
        raise StreamFormatError("CSV stream must start with a non-numeric header row")
    rounds = []
    for lineno, row in enumerate(rows[1:], 2):
        if len(row) != len(header):
            raise StreamFormatError(f"line {lineno}: expected {len(header)} columns, got {len(row)}")
        try:
            rounds.append([float(cell) for cell in row])
        except ValueError as exc:
            raise StreamFormatError(f"line {lineno}: non-numeric probability: {exc}") from exc
    try:
        return ExpertStream(np.asarray(rounds, dtype=float))
    except ValueError as exc:
        raise StreamFormatError(str(exc)) from exc


def load_stream(path: str) -> ExpertStream:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if str(path).lower().endswith(".csv"):
        return read_stream_csv(text)
    return read_stream_jsonl(text)


def write_stream_jsonl(stream: ExpertStream, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in stream:
            fh.write(json.dumps({"p": [float(v) for v in row]}) + "\n")


# ---------------------------------------------------------------- learners

LEARNER_NAMES = ("soft-bayes", "bayes", "eg", "ogd", "ml-soft-bayes", "meta")


@dataclass(frozen=True)
class LearnerSpec:
    """Parsed learner selector, e.g. ``soft-bayes:anytime`` or ``eg:fixed=0.5``.

    A non-uniform prior comes in through the config file, where a learner
    entry may be ``{"spec": "...", "prior": [...]}`` instead of a string.
    """

    text: str
    kind: str
    schedule: ScheduleConfig | None = None
    eta: float | None = None
    rates: tuple = ()
    prior: tuple | None = None

    def build(self, n: int):
        prior = None if self.prior is None else list(self.prior)
        if self.kind == "soft-bayes":
            return SoftBayes(n, self.schedule.build(n), prior=prior, name=self.text)
        if self.kind == "bayes":
            return Bayes(n, prior=prior, name=self.text)
        if self.kind == "eg":
            return ExponentiatedGradient(n, self.eta, prior=prior, name=self.text)
        if self.kind == "ogd":
            return OnlineGradientDescent(n, self.eta, prior=prior, name=self.text)
        if self.kind == "ml-soft-bayes":
            return MLSoftBayes(n, prior=prior, name=self.text)
        if self.kind == "meta":
            return MetaBayes(n, self.rates, prior=prior, name=self.text)
        raise AssertionError(self.kind)

    @property
    def constant_rate(self) -> float | None:
        """The learner's constant rate when it has one (drives bound tables)."""
        if self.kind == "bayes":
            return 1.0
        if self.kind in ("eg", "ogd"):
            return self.eta
        if self.kind == "soft-bayes" and self.schedule.kind == "fixed":
            return self.schedule.param
        return None


def _parse_fixed_rate(kind: str, arg: str) -> float:
    head, sep, value = arg.replace(":", "=").partition("=")
    if head.strip() != "fixed" or not sep:
        raise ConfigError(f"{kind} takes only a fixed rate, e.g. {kind}:fixed=0.5")
    try:
        eta = float(value)
    except ValueError as exc:
        raise ConfigError(f"bad rate for {kind}: {value!r}") from exc
    if not eta > 0.0:
        raise ConfigError(f"{kind} rate must be positive")
    return eta


def parse_learner(text: str) -> LearnerSpec:
    spec = text.strip()
    kind, _, arg = spec.partition(":")
    kind = kind.strip().lower()
    arg = arg.strip()
    if kind == "soft-bayes":
        try:
            schedule = parse_schedule(arg) if arg else ScheduleConfig("anytime")
        except ValueError as exc:
            raise ConfigError(f"bad schedule in {text!r}: {exc}") from exc
        return LearnerSpec(spec, kind, schedule=schedule)
    if kind == "bayes":
        if arg:
            raise ConfigError("bayes takes no schedule (it is soft-bayes at rate 1)")
        return LearnerSpec(spec, kind)
    if kind in ("eg", "ogd"):
        if not arg:
            raise ConfigError(f"{kind} needs a rate, e.g. {kind}:fixed=0.5")
        return LearnerSpec(spec, kind, eta=_parse_fixed_rate(kind, arg))
    if kind == "ml-soft-bayes":
        if arg:
            raise ConfigError("ml-soft-bayes takes no schedule (rates are per-expert)")
        return LearnerSpec(spec, kind)
    if kind == "meta":
        head, sep, value = arg.partition("=")
        if head.strip() != "rates" or not sep:
            raise ConfigError("meta needs sub-rates, e.g. meta:rates=1,0.5,0.25")
        try:
            rates = tuple(float(v) for v in value.split(","))
        except ValueError as exc:
            raise ConfigError(f"bad meta rates {value!r}") from exc
        if not rates or any(not 0.0 < r <= 1.0 for r in rates):
            raise ConfigError("meta rates must lie in (0, 1]")
        return LearnerSpec(spec, kind, rates=rates)
    known = ", ".join(LEARNER_NAMES)
    raise ConfigError(f"unknown learner {text!r}; known: {known}")


# -------------------------------------------------------------- comparator

@dataclass(frozen=True)
class ComparatorSpec:
    kind: str
    boundaries: tuple = ()

    @property
    def k(self) -> int:
        return len(self.boundaries) if self.kind == "shifting" else 1


def parse_comparator(text: str) -> ComparatorSpec:
    spec = text.strip().lower()
    if spec == "fixed-mixture":
        return ComparatorSpec("fixed-mixture")
    if spec == "single-best":
        return ComparatorSpec("single-best")
    if spec.startswith("shifting"):
        _, sep, arg = spec.partition("=")
        if not sep or not arg:
            raise ConfigError("shifting comparator needs boundaries, e.g. shifting=51,101")
        try:
            extra = tuple(int(v) for v in arg.split(","))
        except ValueError as exc:
            raise ConfigError(f"bad shifting boundaries {arg!r}") from exc
        try:
            SegmentSpec((1,) + extra)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return ComparatorSpec("shifting", (1,) + extra)
    raise ConfigError(f"unknown comparator {text!r}; "
                      "known: fixed-mixture, single-best, shifting=t2,t3,...")


def _comparator_loss(cmp_spec: ComparatorSpec, stream: ExpertStream):
    """Solve the configured comparator; returns (loss, detail dict)."""
    if cmp_spec.kind == "fixed-mixture":
        sol = best_fixed_mixture(stream)
        return sol.loss, {
            "kind": "fixed-mixture",
            "weights": [float(v) for v in sol.a],
            "iterations": sol.iterations,
            "converged": sol.converged,
        }
    if cmp_spec.kind == "single-best":
        i, loss = best_single_expert(stream)
        return loss, {"kind": "single-best", "expert": i + 1}
    seg = SegmentSpec(cmp_spec.boundaries)
    sol = shifting_best(stream, seg)
    return sol.total_loss, {
        "kind": "shifting",
        "boundaries": list(seg.boundaries),
        "per_segment": [
            {"weights": [float(v) for v in s.a], "loss": float(s.loss),
             "iterations": s.iterations, "converged": s.converged}
            for s in sol.per_segment
        ],
    }


def _masked_comparator_loss(cmp_spec: ComparatorSpec, stream: ExpertStream,
                            mask: np.ndarray) -> float:
    """Comparator loss over the non-diverged rounds only (continue mode)."""
    if cmp_spec.kind == "shifting":
        total = 0.0
        for s, e in SegmentSpec(cmp_spec.boundaries).segments(len(stream)):
            seg_mask = mask[s - 1 : e]
            if not seg_mask.any():
                continue
            total += best_fixed_mixture(ExpertStream(stream.p[s - 1 : e][seg_mask])).loss
        return total
    sub = ExpertStream(stream.p[mask])
    if cmp_spec.kind == "fixed-mixture":
        return best_fixed_mixture(sub).loss
    return best_single_expert(sub)[1]


# ------------------------------------------------------------------ bounds

def ratio_stats(trace: LearnerTrace, stream: ExpertStream) -> dict:
    """Self-confident statistics of a run, over its finite-loss rounds:
    C1 = sum_t max_i (p_it/M_t - 1), C2 = max_{i,t} (p_it/M_t - 1)^2, and
    vmax = max_i sum_t (p_it/M_t - 1)^2."""
    mask = trace.finite_mask()
    if not mask.any():
        return {"c1": 0.0, "c2": 0.0, "vmax": 0.0}
    P = stream.p[: trace.rounds][mask]
    M = trace.predictions[: trace.rounds][mask]
    excess = P / M[:, None] - 1.0
    sq = excess ** 2
    return {
        "c1": float(excess.max(axis=1).sum()),
        "c2": float(sq.max()),
        "vmax": float(sq.sum(axis=0).max()),
    }


def stream_best_count(stream: ExpertStream) -> int:
    """Number of experts that are ever a per-round argmax (tie rule included)."""
    tracker = BestSetTracker()
    for t, p in enumerate(stream, 1):
        tracker.update(p, t)
    return tracker.total_best

CLI_BOUNDS = ("thm2", "thm3", "thm4", "thm5", "thm6", "thm7", "single-expert")


def _bound_for(variant: str, spec: LearnerSpec, trace: LearnerTrace,
               stream: ExpertStream, cmp_spec: ComparatorSpec, m_best: int):
    """Resolve one bound variant for one learner; returns (value, note).

    Variants that are stated for a constant rate fall back to their tuned
    form when the learner's schedule is not constant.
    """
    T, N = len(stream), stream.n_experts
    eta = spec.constant_rate
    if N < 2:
        return None, "bounds need N >= 2"
    if variant == "thm2":
        if eta is not None and 0.0 < eta < 1.0:
            return theoretical_bound("thm2", T=T, N=N, m=m_best, eta=eta), None
        return theoretical_bound("thm2_tuned_n", T=T, N=N), "tuned form (no constant rate)"
    if variant == "thm3":
        stats = ratio_stats(trace, stream)
        if eta is not None and 0.0 < eta < 1.0:
            return theoretical_bound("thm3_max", T=T, N=N, eta=eta, c2=stats["c2"]), None
        return (theoretical_bound("thm3_tuned", T=T, N=N, c2=stats["c2"]),
                "tuned form (no constant rate)")
    if variant == "thm4":
        stats = ratio_stats(trace, stream)
        if eta is not None and 0.0 < eta < 1.0:
            return theoretical_bound("thm4", T=T, N=N, eta=eta, c1=stats["c1"]), None
        return (theoretical_bound("thm4_tuned", T=T, N=N, c1=stats["c1"]),
                "tuned form (no constant rate)")
    if variant == "thm5":
        return theoretical_bound("thm5", T=T, N=N), None
    if variant == "thm6":
        return theoretical_bound("thm6", T=T, N=N, m=m_best), None
    if variant == "thm7":
        if T < 2:
            return None, "needs T >= 2"
        return theoretical_bound("thm7", T=T, N=N, K=cmp_spec.k), None
    if variant == "single-expert":
        if eta is None or not 0.0 < eta <= 1.0:
            return None, "needs a constant rate in (0, 1]"
        return theoretical_bound("single-expert", eta=eta, prior_entry=1.0 / N), None
    raise ConfigError(f"unknown bound {variant!r}; known: {', '.join(CLI_BOUNDS)}")


# ------------------------------------------------------------------ config

@dataclass
class ExperimentConfig:
    stream: str | None = None
    generator: str | None = None
    learners: tuple = ()
    comparator: str = "fixed-mixture"
    bounds: tuple = ()
    seed: int | None = None
    on_divergence: str = "halt"
    bits: bool = False
    out_csv: str | None = None
    out_json: str | None = None

    def __post_init__(self):
        self.learners = tuple(self.learners)
        self.bounds = tuple(self.bounds)
        if not self.learners:
            raise ConfigError("at least one learner is required")
        if (self.stream is None) == (self.generator is None):
            raise ConfigError("exactly one of a stream file or a generator is required")
        if self.on_divergence not in ("halt", "continue"):
            raise ConfigError(f"unknown divergence policy {self.on_divergence!r}")
        # fail fast on unparsable selectors
        self.learner_specs = [self._learner_spec(entry) for entry in self.learners]
        self.comparator_spec = parse_comparator(self.comparator)
        for b in self.bounds:
            if b not in CLI_BOUNDS:
                raise ConfigError(f"unknown bound {b!r}; known: {', '.join(CLI_BOUNDS)}")
        if self.generator is not None:
            try:
                self.generator_spec = parse_generator(self.generator)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        else:
            self.generator_spec = None

    @staticmethod
    def _learner_spec(entry) -> LearnerSpec:
        if isinstance(entry, str):
            return parse_learner(entry)
        if isinstance(entry, dict):
            unknown = set(entry) - {"spec", "prior"}
            if unknown or "spec" not in entry:
                raise ConfigError("learner objects take exactly 'spec' and optional 'prior'")
            base = parse_learner(entry["spec"])
            if entry.get("prior") is None:
                return base
            return replace(base, prior=tuple(float(v) for v in entry["prior"]))
        raise ConfigError("learner entries must be selector strings or "
                          "{'spec': ..., 'prior': [...]} objects")

    @staticmethod
    def from_json_file(path: str, **overrides) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        allowed = {f.name for f in fields(ExperimentConfig)}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        data.update({k: v for k, v in overrides.items() if v not in (None, (), [])})
        return ExperimentConfig(**data)


# --------------------------------------------------------------- execution

def _fmt(value: float | None, bits: bool = False) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    v = float(value)
    if bits and math.isfinite(v):
        v = v / LN2
    return repr(v)


def _jsonify(value):
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return None
    return value


def _scale(value: float | None, bits: bool):
    if value is None:
        return None
    v = float(value)
    if bits and math.isfinite(v):
        v = v / LN2
    return _jsonify(v)


@dataclass
class RunArtifact:
    config: ExperimentConfig
    stream: ExpertStream
    traces: list
    comparator_detail: dict
    reports: list
    bound_rows: list
    summary: dict
    csv_text: str
    exit_code: int

    def write(self) -> None:
        if self.config.out_csv:
            with open(self.config.out_csv, "w", encoding="utf-8") as fh:
                fh.write(self.csv_text)
        if self.config.out_json:
            with open(self.config.out_json, "w", encoding="utf-8") as fh:
                json.dump(self.summary, fh, sort_keys=True, indent=2)
                fh.write("\n")


def _csv_table(config: ExperimentConfig, stream: ExpertStream, traces: list) -> str:
    T = len(stream)
    width = max(t.weights.shape[1] if t.weights.size else 0 for t in traces)
    stride = 1 if stream.n_experts <= 16 else max(1, math.ceil(T / 1000))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["learner", "t", "eta", "prediction", "loss", "cum_loss"]
                    + [f"w{i + 1}" for i in range(width)])
    bits = config.bits
    for trace in traces:
        cum = trace.cumulative_losses
        for t in range(trace.rounds):
            snapshot = (t + 1) % stride == 0 or t + 1 == trace.rounds
            wcells = ([_fmt(v) for v in trace.weights[t]] if snapshot else []) if width else []
            wcells += [""] * (width - len(wcells))
            writer.writerow([
                trace.name, t + 1,
                _fmt(trace.rates[t]),
                _fmt(trace.predictions[t]),
                _fmt(trace.losses[t], bits),
                _fmt(cum[t], bits),
            ] + wcells)
    return buf.getvalue()


def run_experiment(config: ExperimentConfig) -> RunArtifact:
    """Execute every learner over the configured stream, fit the comparator,
    evaluate bounds, and assemble deterministic artifacts.

    The exit code is 1 when any evaluated bound check fails, else 0.
    """
    if config.generator_spec is not None:
        stream = config.generator_spec.build(config.seed)
        source = f"generator:{config.generator_spec}"
    else:
        stream = load_stream(config.stream)
        source = f"file:{config.stream}"
    cmp_spec = config.comparator_spec
    if cmp_spec.kind == "shifting":
        SegmentSpec(cmp_spec.boundaries).segments(len(stream))  # range check

    names = set()
    traces = []
    for spec in config.learner_specs:
        learner = spec.build(stream.n_experts)
        name = spec.text
        while name in names:
            name += "'"
        names.add(name)
        learner.name = name
        traces.append(run_learner(learner, stream, config.on_divergence))

    comparator_loss, comparator_detail = _comparator_loss(cmp_spec, stream)
    m_best = stream_best_count(stream)

    reports, bound_rows, learner_summaries = [], [], []
    any_bound_failed = False
    for spec, trace in zip(config.learner_specs, traces):
        excluded = 0
        if trace.diverged and config.on_divergence == "continue":
            mask = trace.finite_mask()
            excluded = int((~mask).sum())
            cmp_loss_i = _masked_comparator_loss(cmp_spec, stream, mask)
            report = regret_report(trace, cmp_loss_i, exclude_diverged=True)
        else:
            cmp_loss_i = comparator_loss
            report = regret_report(trace, cmp_loss_i)
        reports.append(report)

        rows = []
        for variant in config.bounds:
            value, note = _bound_for(variant, spec, trace, stream, cmp_spec, m_best)
            satisfied = None
            if value is not None:
                satisfied = bool(report.regret <= value + BOUND_SLACK)
                if not satisfied:
                    any_bound_failed = True
            row = {"variant": variant, "value": _scale(value, config.bits),
                   "satisfied": satisfied}
            if note:
                row["note"] = note
            rows.append(row)
        bound_rows.append(rows)

        learner_summaries.append({
            "name": trace.name,
            "loss": _scale(report.learner_loss, config.bits),
            "comparator_loss": _scale(cmp_loss_i, config.bits),
            "regret": _scale(report.regret, config.bits),
            "diverged": trace.diverged,
            "halted_at": trace.halted_at,
            "excluded_rounds": excluded,
            "rounds": trace.rounds,
            "bounds": rows,
        })

    exit_code = 1 if any_bound_failed else 0
    detail = dict(comparator_detail)
    detail["loss"] = _scale(comparator_loss, config.bits)
    summary = {
        "config": {
            "stream": config.stream,
            "generator": str(config.generator_spec) if config.generator_spec else None,
            "learners": list(config.learners),
            "comparator": config.comparator,
            "bounds": list(config.bounds),
            "seed": config.seed,
            "on_divergence": config.on_divergence,
            "units": "bits" if config.bits else "nats",
        },
        "stream": {"rounds": len(stream), "experts": stream.n_experts, "source": source},
        "rng": {"name": RNG_NAME, "seed": config.seed},
        "comparator": detail,
        "learners": learner_summaries,
        "exit_code": exit_code,
    }
    return RunArtifact(
        config=config,
        stream=stream,
        traces=traces,
        comparator_detail=detail,
        reports=reports,
        bound_rows=bound_rows,
        summary=summary,
        csv_text=_csv_table(config, stream, traces),
        exit_code=exit_code,
    )
