"""Run configuration: a TOML file of dotted keys, validated against a fixed table.

Unknown keys are errors.  Every key has a default, and the resolved mapping
(defaults filled in) is what gets written to the run manifest.
"""

from ._toml import TOMLDecodeError, flatten, load_toml
from .acquisition import Policy, RunConfig
from .balance_experiment import BalanceDesign
from .dataset import CsvSchema, MetadataDataset, load_csv, load_spambase, synthetic_classification
from .learner import METRICS, LearnerSpec


class ConfigError(ValueError):
    """Invalid configuration; the CLI exits with status 2."""


_INT, _FLOAT, _STR, _BOOL, _LIST = "int", "float", "str", "bool", "list"

#: key -> (type, default)
KEYS = {
    "seed": (_INT, 0),
    "metric": (_STR, "ccr"),
    "p0.a": (_FLOAT, None),
    "dataset.kind": (_STR, "counts"),
    "dataset.path": (_STR, None),
    "dataset.schema": (_STR, None),
    "dataset.header": (_BOOL, True),
    "dataset.label_column": (_STR, "label"),
    "dataset.category_column": (_STR, None),
    "dataset.category_rule": (_STR, None),
    "dataset.drop_columns": (_LIST, []),
    "dataset.n_a": (_INT, 50),
    "dataset.n_b": (_INT, 50),
    "dataset.n_per_category": (_INT, 500),
    "dataset.separation": (_FLOAT, 4.0),
    "dataset.hard_ratio": (_FLOAT, 0.5),
    "dataset.n_features": (_INT, 5),
    "learner.kind": (_STR, "oracle"),
    "learner.tree_count": (_INT, 100),
    "learner.max_depth": (_INT, None),
    "learner.min_leaf": (_INT, 1),
    "learner.feature_subset_size": (_INT, None),
    "learner.noise_sd": (_FLOAT, 0.05),
    "experiment.b": (_INT, 100),
    "experiment.z": (_INT, 10),
    "experiment.q": (_INT, 100),
    "experiment.n": (_INT, 20),
    "experiment.n_a": (_INT, None),
    "experiment.n_b": (_INT, None),
    "experiment.test_composition": (_STR, "population"),
    "campaign.n_start": (_INT, 100),
    "campaign.n_stop": (_INT, 500),
    "campaign.step": (_INT, 20),
    "campaign.policy": (_STR, "gpaml"),
    "campaign.holdout": (_INT, 1000),
    "campaign.start_n_a": (_INT, None),
    "campaign.start_n_a_range": (_LIST, None),
    "suitability.reps": (_INT, 100),
    "suitability.major": (_INT, 90),
    "suitability.minor": (_INT, 10),
    "suitability.holdout": (_INT, 500),
    "robustness.b_total": (_INT, 250),
    "robustness.sizes": (_LIST, [100, 150, 200]),
    "robustness.reps": (_INT, 100),
    "robustness.good_n_a_range": (_LIST, None),
}


def _coerce(key, value, kind):
    if value is None:
        return None
    ok = {
        _INT: isinstance(value, int) and not isinstance(value, bool),
        _FLOAT: isinstance(value, (int, float)) and not isinstance(value, bool),
        _STR: isinstance(value, str),
        _BOOL: isinstance(value, bool),
        _LIST: isinstance(value, list),
    }[kind]
    if not ok:
        raise ConfigError(f"config key {key!r} expects {kind}, got {value!r}")
    return float(value) if kind == _FLOAT else value


def resolve(raw):
    """Validate a flat ``{dotted.key: value}`` mapping and fill defaults."""
    unknown = sorted(set(raw) - set(KEYS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    cfg = {key: default for key, (_, default) in KEYS.items()}
    for key, value in raw.items():
        cfg[key] = _coerce(key, value, KEYS[key][0])
    if cfg["metric"] not in METRICS:
        raise ConfigError(f"config key 'metric' must be one of {METRICS}, got {cfg['metric']!r}")
    return cfg


def load_config(path, overrides=None):
    try:
        raw = flatten(load_toml(path))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return resolve(raw)


def _checked(build, what):
    try:
        return build()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {what} settings: {exc}") from None


def build_dataset(cfg):
    kind = cfg["dataset.kind"]
    p0 = None if cfg["p0.a"] is None else (cfg["p0.a"], 1.0 - cfg["p0.a"])
    if kind == "counts":
        return _checked(lambda: MetadataDataset.from_counts(cfg["dataset.n_a"], cfg["dataset.n_b"], p0), "dataset")
    if kind == "synthetic":
        ds = _checked(lambda: synthetic_classification(
            cfg["dataset.n_per_category"], cfg["dataset.separation"], cfg["seed"],
            n_features=cfg["dataset.n_features"], hard_ratio=cfg["dataset.hard_ratio"],
        ), "dataset")
        return ds if p0 is None else ds.with_p0(p0)
    if kind in ("csv", "spambase"):
        if not cfg["dataset.path"]:
            raise ConfigError(f"dataset.kind = {kind!r} needs dataset.path")
        if kind == "spambase":
            return load_spambase(cfg["dataset.path"], p0=p0)
        if cfg["dataset.schema"]:
            schema = CsvSchema.from_toml(cfg["dataset.schema"])
        else:
            schema = _checked(lambda: CsvSchema(
                label_column=cfg["dataset.label_column"],
                category_column=cfg["dataset.category_column"],
                category_rule=cfg["dataset.category_rule"],
                drop_columns=tuple(cfg["dataset.drop_columns"]),
                header=cfg["dataset.header"],
            ), "dataset")
        return load_csv(cfg["dataset.path"], schema, p0=p0)
    raise ConfigError(f"config key 'dataset.kind' must be counts, synthetic, csv or spambase; got {kind!r}")


def build_learner(cfg):
    return _checked(lambda: LearnerSpec(
        kind=cfg["learner.kind"], tree_count=cfg["learner.tree_count"],
        max_depth=cfg["learner.max_depth"], min_leaf=cfg["learner.min_leaf"],
        feature_subset_size=cfg["learner.feature_subset_size"], noise_sd=cfg["learner.noise_sd"],
    ), "learner")


def build_design(cfg):
    return _checked(lambda: BalanceDesign(
        cfg["experiment.b"], cfg["experiment.z"], cfg["metric"], cfg["experiment.test_composition"],
    ), "experiment")


def build_policy(cfg):
    return _checked(lambda: Policy.parse(cfg["campaign.policy"]), "campaign.policy")


def build_run_config(cfg, n_jobs=1):
    rng = cfg["campaign.start_n_a_range"]
    if rng is not None and len(rng) != 2:
        raise ConfigError("campaign.start_n_a_range must be a two-element list")
    return _checked(lambda: RunConfig(
        n_start=cfg["campaign.n_start"], n_stop=cfg["campaign.n_stop"], step=cfg["campaign.step"],
        design=build_design(cfg), q=cfg["experiment.q"], holdout=cfg["campaign.holdout"],
        start_n_a=cfg["campaign.start_n_a"], start_n_a_range=None if rng is None else tuple(rng),
        n_jobs=n_jobs,
    ), "campaign")
