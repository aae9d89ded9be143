"""End-to-end experiment runner: train, quantize, inject faults, sweep, report.

A sweep walks the Cartesian product of a voltage grid and a layout list; each
point samples `chips_per_point` Monte Carlo chip instances, loads the shared
quantized network into each, and measures classification accuracy plus the
closed-form power/area of the configuration. Results land in a CSV (one row
per point) and a JSON summary carrying the config hash and all derived seeds.

Everything is deterministic in (config, master seed): per-chip seeds are
derived by a counter-based hash of (master seed, voltage, layout digest, chip
index), so thread count and execution order cannot change any result.
"""

from __future__ import annotations

import csv
import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .data import gen_synthetic, load_idx
from .faultmem import (
    AccessMode,
    FailureModel,
    MemoryLayout,
    sample_chip,
    write_weights,
)
from .powerarea import (
    AccessTrace,
    PowerAreaReport,
    PowerParams,
    Savings,
    aggregate,
    evaluation_trace,
    savings,
)
from .quantnet import (
    Dataset,
    FixedPointFormat,
    FloatNetwork,
    NetworkArch,
    QuantizedNetwork,
    TrainConfig,
    evaluate,
    init_network,
    quantize,
    train_backprop,
)
from .seeding import derive_seed

CSV_COLUMNS = [
    "voltage_v",
    "layout",
    "chips",
    "acc_mean",
    "acc_std",
    "acc_min",
    "read_pw",
    "write_pw",
    "leak_pw",
    "total_pw",
    "savings_total_pct",
    "area_units",
    "area_overhead_pct",
    "seed",
]

CONFIG_SCHEMA_VERSION = 1


def parse_layout(spec, word_bits: int) -> MemoryLayout:
    """Layout spec: "all6t" | {"hybrid": k} | {"banks": [k, ...]}."""
    if isinstance(spec, MemoryLayout):
        return spec
    if spec == "all6t":
        return MemoryLayout.all_six_t(word_bits)
    if isinstance(spec, dict) and "hybrid" in spec:
        return MemoryLayout.hybrid_uniform(int(spec["hybrid"]), word_bits)
    if isinstance(spec, dict) and "banks" in spec:
        return MemoryLayout.sensitivity_banks(spec["banks"], word_bits)
    raise ValueError(f"unrecognized layout spec: {spec!r}")


def layout_to_json(layout: MemoryLayout):
    if layout.k_per_bank is not None:
        return {"banks": list(layout.k_per_bank)}
    if layout.k == 0 and layout.kind.value == "all6t":
        return "all6t"
    return {"hybrid": layout.k}


@dataclass
class DatasetSpec:
    kind: str  # "synthetic" | "idx"
    classes: int = 10
    dim: int = 64
    train_n: int = 2000
    test_n: int = 1000
    seed: int = 0
    sigma: float = 0.06
    train_images: str | None = None
    train_labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None
    limit_test: int | None = None

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "synthetic":
            out.update(
                classes=self.classes,
                dim=self.dim,
                train_n=self.train_n,
                test_n=self.test_n,
                seed=self.seed,
                sigma=self.sigma,
            )
        else:
            out.update(
                train_images=self.train_images,
                train_labels=self.train_labels,
                test_images=self.test_images,
                test_labels=self.test_labels,
                limit_test=self.limit_test,
            )
        return out


@dataclass
class ExperimentConfig:
    arch: NetworkArch
    dataset: DatasetSpec
    failure_model_path: Path
    power_params_path: Path
    layouts: list[MemoryLayout]
    voltages: list[float]
    baseline_layout: MemoryLayout
    baseline_voltage: float
    format_bits: int = 8
    chips_per_point: int = 20
    master_seed: int = 0
    access_mode: AccessMode = AccessMode.STATIC_MASK
    train: TrainConfig = field(default_factory=TrainConfig)
    profile_voltage: float = 0.65
    profiles: list[tuple[int, ...]] = field(default_factory=list)

    def __post_init__(self):
        if self.chips_per_point < 1:
            raise ValueError("chips_per_point must be >= 1")

    @classmethod
    def from_json(cls, obj: dict, base_dir: Path) -> "ExperimentConfig":
        version = obj.get("schema_version", CONFIG_SCHEMA_VERSION)
        if version != CONFIG_SCHEMA_VERSION:
            raise ValueError(f"unsupported config schema_version {version}")
        word_bits = int(obj.get("format_bits", 8))
        ds = obj["dataset"]
        dataset = DatasetSpec(
            kind=ds["kind"],
            **{k: v for k, v in ds.items() if k != "kind"},
        )
        baseline = obj["baseline"]
        train = TrainConfig(**obj.get("train", {}))
        return cls(
            arch=NetworkArch(tuple(obj["arch"])),
            dataset=dataset,
            failure_model_path=_resolve(obj["failure_model"], base_dir),
            power_params_path=_resolve(obj["power_params"], base_dir),
            layouts=[parse_layout(s, word_bits) for s in obj["layouts"]],
            voltages=[float(v) for v in obj["voltages"]],
            baseline_layout=parse_layout(baseline["layout"], word_bits),
            baseline_voltage=float(baseline["voltage"]),
            format_bits=word_bits,
            chips_per_point=int(obj.get("chips_per_point", 20)),
            master_seed=int(obj.get("master_seed", 0)),
            access_mode=AccessMode(obj.get("access_mode", "static")),
            train=train,
            profile_voltage=float(obj.get("profile_voltage", 0.65)),
            profiles=[tuple(int(k) for k in p) for p in obj.get("profiles", [])],
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        with open(path) as f:
            return cls.from_json(json.load(f), path.parent)

    def to_json(self) -> dict:
        return {
            "schema_version": CONFIG_SCHEMA_VERSION,
            "arch": list(self.arch.layer_sizes),
            "format_bits": self.format_bits,
            "dataset": self.dataset.to_json(),
            "failure_model": str(self.failure_model_path),
            "power_params": str(self.power_params_path),
            "layouts": [layout_to_json(l) for l in self.layouts],
            "voltages": self.voltages,
            "baseline": {
                "layout": layout_to_json(self.baseline_layout),
                "voltage": self.baseline_voltage,
            },
            "chips_per_point": self.chips_per_point,
            "master_seed": self.master_seed,
            "access_mode": self.access_mode.value,
            "train": {
                "lr": self.train.lr,
                "epochs": self.train.epochs,
                "batch": self.train.batch,
                "seed": self.train.seed,
            },
            "profile_voltage": self.profile_voltage,
            "profiles": [list(p) for p in self.profiles],
        }


def _resolve(path_str: str, base_dir: Path) -> Path:
    p = Path(path_str)
    return p if p.is_absolute() else (base_dir / p)


def config_hash(config: ExperimentConfig, model: FailureModel, params: PowerParams) -> str:
    """Hash of the fully resolved experiment inputs (paths excluded, contents included)."""
    obj = config.to_json()
    obj["failure_model"] = model.to_json()
    obj["power_params"] = params.to_json()
    canonical = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def _train_fingerprint(config: ExperimentConfig) -> str:
    obj = {
        "arch": list(config.arch.layer_sizes),
        "dataset": config.dataset.to_json(),
        "train": config.to_json()["train"],
    }
    canonical = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def save_float_net(net: FloatNetwork, path: Path) -> None:
    arrays = {}
    for b, (w, bias) in enumerate(zip(net.weights, net.biases)):
        arrays[f"w{b}"] = w
        arrays[f"b{b}"] = bias
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, arch=np.array(net.arch.layer_sizes), **arrays)


def load_float_net(path: Path) -> FloatNetwork:
    with np.load(path) as z:
        arch = NetworkArch(tuple(int(s) for s in z["arch"]))
        weights = [z[f"w{b}"] for b in range(arch.n_banks)]
        biases = [z[f"b{b}"] for b in range(arch.n_banks)]
    return FloatNetwork(arch, weights, biases)


def load_datasets(spec: DatasetSpec) -> tuple[Dataset, Dataset]:
    if spec.kind == "synthetic":
        train = gen_synthetic(
            spec.classes, spec.dim, spec.train_n, spec.seed, "train", sigma=spec.sigma
        )
        test = gen_synthetic(
            spec.classes, spec.dim, spec.test_n, spec.seed, "test", sigma=spec.sigma
        )
        return train, test
    if spec.kind == "idx":
        train = load_idx(spec.train_images, spec.train_labels, "train")
        test = load_idx(spec.test_images, spec.test_labels, "test", limit=spec.limit_test)
        return train, test
    raise ValueError(f"unrecognized dataset kind: {spec.kind!r}")


@dataclass
class Experiment:
    """A prepared experiment: trained + quantized network and loaded models."""

    config: ExperimentConfig
    model: FailureModel
    power_params: PowerParams
    train_data: Dataset
    test_data: Dataset
    float_net: FloatNetwork
    qnet: QuantizedNetwork
    float_accuracy: float
    ref_accuracy: float  # fault-free accuracy of the quantized network

    @classmethod
    def prepare(cls, config: ExperimentConfig, cache_dir: Path | None = None) -> "Experiment":
        """Train (or load from cache), quantize, and load the model files.

        Training happens once in float at full precision; every fault study
        reuses the same quantized network so accuracy deltas isolate memory
        effects.
        """
        model = FailureModel.load(config.failure_model_path)
        params = PowerParams.load(config.power_params_path)
        train_data, test_data = load_datasets(config.dataset)
        net = None
        cache_path = None
        if cache_dir is not None:
            cache_path = Path(cache_dir) / f"floatnet-{_train_fingerprint(config)}.npz"
            if cache_path.exists():
                net = load_float_net(cache_path)
        if net is None:
            net = init_network(config.arch, derive_seed(config.train.seed, "init"))
            net = train_backprop(net, train_data, config.train)
            if cache_path is not None:
                save_float_net(net, cache_path)
        qnet = quantize(net, FixedPointFormat(config.format_bits))
        float_acc = evaluate(net, test_data).accuracy
        ref_acc = evaluate(qnet, test_data).accuracy
        return cls(
            config=config,
            model=model,
            power_params=params,
            train_data=train_data,
            test_data=test_data,
            float_net=net,
            qnet=qnet,
            float_accuracy=float_acc,
            ref_accuracy=ref_acc,
        )

    @property
    def bank_shapes(self) -> list[tuple[int, int]]:
        return self.config.arch.bank_shapes

    def trace(self) -> AccessTrace:
        return evaluation_trace(self.power_params, self.bank_shapes, len(self.test_data))

    def baseline_report(self) -> PowerAreaReport:
        return aggregate(
            self.power_params,
            self.config.baseline_layout,
            self.bank_shapes,
            self.trace(),
            self.config.baseline_voltage,
        )


@dataclass
class PointResult:
    voltage: float
    layout: MemoryLayout
    accuracies: np.ndarray
    power: PowerAreaReport | None
    savings: Savings | None
    point_seed: int
    chip_seeds: list[int] = field(default_factory=list)
    error: str | None = None

    @property
    def acc_mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def acc_std(self) -> float:
        return float(np.std(self.accuracies))

    @property
    def acc_min(self) -> float:
        return float(np.min(self.accuracies))


def evaluate_chip(exp: Experiment, v: float, layout: MemoryLayout, chip_index: int) -> float:
    """Accuracy of one sampled chip at (v, layout)."""
    digest = layout.digest(exp.config.arch.n_banks)
    chip_seed = derive_seed(exp.config.master_seed, "chip", v, digest, chip_index)
    write_seed = derive_seed(exp.config.master_seed, "write", v, digest, chip_index)
    chip = sample_chip(layout, exp.model, v, exp.bank_shapes, chip_seed)
    store = write_weights(chip, exp.qnet, write_seed, exp.config.access_mode)
    return evaluate(exp.qnet, exp.test_data, store).accuracy


def run_point(exp: Experiment, v: float, layout: MemoryLayout, jobs: int = 1) -> PointResult:
    """Monte Carlo over chip instances at one (voltage, layout) point.

    Chip evaluations are pure functions of derived seeds and may run in any
    order; results reduce in chip-index order, so `jobs` never changes them.
    """
    cfg = exp.config
    digest = layout.digest(cfg.arch.n_banks)
    point_seed = derive_seed(cfg.master_seed, "point", v, digest)
    chip_seeds = [
        derive_seed(cfg.master_seed, "chip", v, digest, i) for i in range(cfg.chips_per_point)
    ]
    indices = range(cfg.chips_per_point)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            accuracies = list(pool.map(lambda i: evaluate_chip(exp, v, layout, i), indices))
    else:
        accuracies = [evaluate_chip(exp, v, layout, i) for i in indices]
    report = aggregate(exp.power_params, layout, exp.bank_shapes, exp.trace(), v)
    sav = savings(report, exp.baseline_report())
    return PointResult(
        voltage=v,
        layout=layout,
        accuracies=np.array(accuracies),
        power=report,
        savings=sav,
        point_seed=point_seed,
        chip_seeds=chip_seeds,
    )


def _fmt(x) -> str:
    return repr(float(x))


def _csv_row(result: PointResult) -> list[str]:
    if result.error is not None:
        nan = _fmt(float("nan"))
        return [
            _fmt(result.voltage),
            result.layout.label,
            "0",
            nan,
            nan,
            nan,
            nan,
            nan,
            nan,
            nan,
            nan,
            nan,
            nan,
            str(result.point_seed),
        ]
    return [
        _fmt(result.voltage),
        result.layout.label,
        str(len(result.accuracies)),
        _fmt(result.acc_mean),
        _fmt(result.acc_std),
        _fmt(result.acc_min),
        _fmt(result.power.read_power),
        _fmt(result.power.write_power),
        _fmt(result.power.leakage_power),
        _fmt(result.power.total),
        _fmt(result.savings.total_pct),
        _fmt(result.power.area_units),
        _fmt(result.power.area_overhead_fraction * 100.0),
        str(result.point_seed),
    ]


def _row_json(result: PointResult) -> dict:
    out = {
        "voltage_v": result.voltage,
        "layout": result.layout.label,
        "point_seed": result.point_seed,
        "chip_seeds": result.chip_seeds,
    }
    if result.error is not None:
        out["error"] = result.error
        return out
    out.update(
        {
            "chips": len(result.accuracies),
            "accuracies": [float(a) for a in result.accuracies],
            "acc_mean": result.acc_mean,
            "acc_std": result.acc_std,
            "acc_min": result.acc_min,
            "read_pw": result.power.read_power,
            "write_pw": result.power.write_power,
            "leak_pw": result.power.leakage_power,
            "total_pw": result.power.total,
            "savings_total_pct": result.savings.total_pct,
            "area_units": result.power.area_units,
            "area_overhead_pct": result.power.area_overhead_fraction * 100.0,
        }
    )
    return out


def sweep(
    exp: Experiment,
    out_dir: Path,
    jobs: int = 1,
    csv_name: str = "sweep.csv",
    summary_name: str = "sweep_summary.json",
) -> list[PointResult]:
    """Voltage grid x layout list; CSV rows flushed as each point completes."""
    cfg = exp.config
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / csv_name
    results: list[PointResult] = []
    errors: list[dict] = []
    with open(csv_path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        f.flush()
        for v in cfg.voltages:
            for layout in cfg.layouts:
                try:
                    result = run_point(exp, v, layout, jobs=jobs)
                except Exception as e:  # noqa: BLE001 - partial results still flush
                    digest = layout.digest(cfg.arch.n_banks)
                    result = PointResult(
                        voltage=v,
                        layout=layout,
                        accuracies=np.array([]),
                        power=None,
                        savings=None,
                        point_seed=derive_seed(cfg.master_seed, "point", v, digest),
                        error=f"{type(e).__name__}: {e}",
                    )
                    errors.append(
                        {"voltage_v": v, "layout": layout.label, "error": result.error}
                    )
                results.append(result)
                writer.writerow(_csv_row(result))
                f.flush()
    summary = {
        "schema_version": CONFIG_SCHEMA_VERSION,
        "synmem_version": __version__,
        "config_hash": config_hash(exp.config, exp.model, exp.power_params),
        "master_seed": cfg.master_seed,
        "access_mode": cfg.access_mode.value,
        "float_accuracy": exp.float_accuracy,
        "ref_accuracy": exp.ref_accuracy,
        "baseline": {
            "layout": exp.config.baseline_layout.label,
            "voltage": cfg.baseline_voltage,
        },
        "rows": [_row_json(r) for r in results],
        "errors": errors,
    }
    with open(out_dir / summary_name, "w") as f:
        json.dump(summary, f, sort_keys=True, indent=2)
        f.write("\n")
    return results


@dataclass
class ProfileRow:
    layout: MemoryLayout
    result: PointResult
    pareto: bool = False


def compare_sensitivity_profiles(
    exp: Experiment,
    profiles: list[tuple[int, ...]] | None = None,
    jobs: int = 1,
) -> list[ProfileRow]:
    """Run each per-bank protection profile at the configured profile voltage.

    Returns rows sorted by total power savings (descending), with Pareto
    flags: a row is Pareto-optimal if no other row has >= savings, <= area
    overhead, and >= mean accuracy with at least one strict improvement.
    """
    cfg = exp.config
    if profiles is None:
        profiles = cfg.profiles
    n_banks = cfg.arch.n_banks
    rows = []
    for profile in profiles:
        if len(profile) != n_banks:
            raise ValueError(
                f"profile {profile} has {len(profile)} entries, need {n_banks}"
            )
        layout = MemoryLayout.sensitivity_banks(profile, cfg.format_bits)
        rows.append(ProfileRow(layout, run_point(exp, cfg.profile_voltage, layout, jobs=jobs)))

    def dominates(a: ProfileRow, b: ProfileRow) -> bool:
        better = (
            a.result.savings.total_pct >= b.result.savings.total_pct
            and a.result.power.area_overhead_fraction <= b.result.power.area_overhead_fraction
            and a.result.acc_mean >= b.result.acc_mean
        )
        strict = (
            a.result.savings.total_pct > b.result.savings.total_pct
            or a.result.power.area_overhead_fraction < b.result.power.area_overhead_fraction
            or a.result.acc_mean > b.result.acc_mean
        )
        return better and strict

    for row in rows:
        row.pareto = not any(dominates(other, row) for other in rows if other is not row)
    rows.sort(key=lambda r: -r.result.savings.total_pct)
    return rows


def write_profile_report(exp: Experiment, rows: list[ProfileRow], out_dir: Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "profiles.csv", "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_COLUMNS + ["pareto"])
        for row in rows:
            writer.writerow(_csv_row(row.result) + [str(int(row.pareto))])
    summary = {
        "schema_version": CONFIG_SCHEMA_VERSION,
        "synmem_version": __version__,
        "config_hash": config_hash(exp.config, exp.model, exp.power_params),
        "profile_voltage": exp.config.profile_voltage,
        "ref_accuracy": exp.ref_accuracy,
        "rows": [
            {**_row_json(row.result), "pareto": row.pareto} for row in rows
        ],
    }
    with open(out_dir / "profiles.json", "w") as f:
        json.dump(summary, f, sort_keys=True, indent=2)
        f.write("\n")


def power_table(exp: Experiment) -> list[PointResult]:
    """Closed-form power/area for every (voltage, layout), no fault sampling."""
    rows = []
    base = exp.baseline_report()
    for v in exp.config.voltages:
        for layout in exp.config.layouts:
            report = aggregate(exp.power_params, layout, exp.bank_shapes, exp.trace(), v)
            rows.append(
                PointResult(
                    voltage=v,
                    layout=layout,
                    accuracies=np.array([float("nan")]),
                    power=report,
                    savings=savings(report, base),
                    point_seed=0,
                )
            )
    return rows
