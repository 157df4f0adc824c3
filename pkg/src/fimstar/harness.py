"""Experiment configuration, drivers, and CSV emission.

Config files are flat UTF-8 ``section.key = value`` lines; unknown keys are
rejected so typos fail loudly, and every key has a default so an empty file
is a complete configuration at the full reference scale. A desk-scale preset shrinks the
scenario enough for laptop runs.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .drl import AGENT_KINDS, Td3Params, train
from .env import EnvConfig, FimStarEnv, action_dim
from .fbl import LinkBudget
from .numerics import PrngStream

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "parse_config_text",
    "dump_config",
    "config_hash",
    "desk_overrides",
    "env_config_from",
    "td3_params_from",
    "run_convergence",
    "run_sweep",
    "evaluate_policy",
    "SMOOTH_WINDOW",
]

SMOOTH_WINDOW = 20
OUTPUT_ENV_VAR = "FIMSTAR_OUT"

# substream labels under PrngStream(seed)
_SUB_ENV = 0           # training environment channels (see drl for 1..5)
EVAL_STREAM_LABEL = 6  # fresh evaluation channels, shared across sweep points


class ConfigError(ValueError):
    """Config problems carry the offending key/line in the message."""


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_floats(text: str):
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def _parse_ints(text: str):
    return tuple(int(tok) for tok in text.split(",") if tok.strip())


def _parse_names(text: str):
    return tuple(tok.strip() for tok in text.split(",") if tok.strip())


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


# key -> (default, parser, validator-or-None); defaults are the reference scale.
_SCHEMA: dict = {
    "scenario.p_y": (4, int, lambda v: v >= 1),
    "scenario.p_z": (4, int, lambda v: v >= 1),
    "scenario.f": (400, int, lambda v: v >= 1),
    "scenario.n": (6, int, lambda v: v >= 1),
    "scenario.d": (16, int, lambda v: v >= 1),
    "scenario.episode_len": (20, int, lambda v: v >= 1),
    "scenario.redraw_per_episode": (True, _parse_bool, None),
    "scenario.wavelength_m": (0.01, float, lambda v: v > 0),
    "scenario.spacing_wavelengths": (0.5, float, lambda v: v > 0),
    "scenario.x_max_wavelengths": (0.5, float, lambda v: v >= 0),
    "scenario.noise_dbm_per_hz": (-22.2, float, None),
    "scenario.bandwidth_hz": (1.0, float, lambda v: v > 0),
    "scenario.error_prob": (1e-5, float, lambda v: 0 < v < 1),
    "scenario.blocklength": (128, int, lambda v: v >= 1),
    "scenario.gamma_min": ((1.0,), _parse_floats, lambda v: all(g >= 0 for g in v)),
    "scenario.p_max_dbm": (30.0, float, None),
    "scenario.pathloss_l0": (1.0, float, lambda v: v > 0),
    "scenario.pathloss_d0": (1.0, float, lambda v: v > 0),
    "scenario.pathloss_exp": (2.2, float, lambda v: v >= 0),
    "scenario.dist_bs_user": ((1.0,), _parse_floats, lambda v: all(d > 0 for d in v)),
    "scenario.dist_bs_ris": (1.0, float, lambda v: v > 0),
    "scenario.dist_ris_user": ((1.0,), _parse_floats, lambda v: all(d > 0 for d in v)),
    "agent.gamma": (0.99, float, lambda v: 0 <= v < 1),
    "agent.tau1": (0.005, float, lambda v: 0 < v <= 1),
    "agent.tau2": (0.005, float, lambda v: 0 < v <= 1),
    "agent.policy_delay": (2, int, lambda v: v >= 1),
    "agent.noise_sigma": (0.2, float, lambda v: v >= 0),
    "agent.noise_clip": (0.5, float, lambda v: v > 0),
    "agent.expl_sigma": (0.1, float, lambda v: v >= 0),
    "agent.lr": (1e-4, float, lambda v: v > 0),
    "agent.meta_lr": (1e-4, float, lambda v: v > 0),
    "agent.batch_size": (64, int, lambda v: v >= 1),
    "agent.buffer_capacity": (100_000, int, lambda v: v >= 1),
    "agent.warmup_steps": (1000, int, lambda v: v >= 0),
    "agent.hidden": ((500, 400, 300), _parse_ints, lambda v: all(h >= 1 for h in v)),
    "agent.meta_hidden": ((64,), _parse_ints, lambda v: all(h >= 1 for h in v)),
    "agent.first_order_meta": (False, _parse_bool, None),
    "run.episodes": (300, int, lambda v: v >= 1),
    "run.seeds": ((1, 2, 3), _parse_ints, lambda v: len(v) >= 1),
    "run.agents": (("meta_td3", "td3"), _parse_names,
                   lambda v: len(v) >= 1 and all(a in AGENT_KINDS for a in v)),
    "run.output_dir": ("", str, None),
    "run.eval_draws": (100, int, lambda v: v >= 1),
    "sweep.kind": ("none", str, lambda v: v in ("none", "power", "sinr_min", "ris_elements")),
    "sweep.grid": ((), _parse_floats, None),
}


def desk_overrides() -> dict:
    """Laptop-scale scenario/agent overrides (2x2 array, 4x4 surface, 2 users)."""
    return {
        "scenario.p_y": "2", "scenario.p_z": "2", "scenario.f": "16",
        "scenario.n": "2", "scenario.d": "4",
        "agent.hidden": "64,64", "agent.meta_hidden": "64",
        "agent.warmup_steps": "500", "agent.buffer_capacity": "20000",
    }


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed, validated configuration; values keyed by the schema names."""

    values: tuple  # ((key, value), ...) sorted

    def __getitem__(self, key: str):
        return dict(self.values)[key]

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        """Override by key (python values, not strings); used by sweeps."""
        table = dict(self.values)
        for key, value in overrides.items():
            if key not in _SCHEMA:
                raise ConfigError(f"unknown config key: {key}")
            table[key] = value
        cfg = ExperimentConfig(tuple(sorted(table.items())))
        _cross_validate(cfg)
        return cfg


def _cross_validate(cfg: ExperimentConfig) -> None:
    if cfg["scenario.p_y"] * cfg["scenario.p_z"] < cfg["scenario.n"]:
        raise ConfigError("scenario.p_y * scenario.p_z must be >= scenario.n")
    n = cfg["scenario.n"]
    for key in ("scenario.gamma_min", "scenario.dist_bs_user", "scenario.dist_ris_user"):
        if len(cfg[key]) not in (1, n):
            raise ConfigError(f"{key} needs 1 or {n} entries")
    if cfg["sweep.kind"] != "none" and len(cfg["sweep.grid"]) == 0:
        raise ConfigError("sweep.grid must be non-empty when sweep.kind is set")
    if cfg["agent.buffer_capacity"] < cfg["agent.batch_size"]:
        raise ConfigError("agent.buffer_capacity must be >= agent.batch_size")


def parse_config_text(text: str, overrides: dict | None = None) -> ExperimentConfig:
    table = {key: default for key, (default, _, _) in _SCHEMA.items()}
    raw: dict[str, str] = dict(overrides or {})
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'section.key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        raw[key.strip()] = value.strip()
    for key, value in raw.items():
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key: {key}")
        _, parser, validator = _SCHEMA[key]
        try:
            parsed = parser(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from exc
        if validator is not None and not validator(parsed):
            raise ConfigError(f"value out of range for {key}: {value}")
        table[key] = parsed
    cfg = ExperimentConfig(tuple(sorted(table.items())))
    _cross_validate(cfg)
    return cfg


def load_config(path, desk: bool = False) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"),
                             overrides=desk_overrides() if desk else None)


def dump_config(cfg: ExperimentConfig) -> str:
    """Canonical form: every key, sorted, one per line."""
    return "\n".join(f"{key} = {_fmt(value)}" for key, value in cfg.values) + "\n"


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(dump_config(cfg).encode()).hexdigest()[:12]


def _dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


def env_config_from(cfg: ExperimentConfig) -> EnvConfig:
    n = cfg["scenario.n"]
    lam = cfg["scenario.wavelength_m"]
    noise_dbm = cfg["scenario.noise_dbm_per_hz"] + 10.0 * math.log10(cfg["scenario.bandwidth_hz"])
    sigma2 = np.full(n, _dbm_to_watts(noise_dbm))
    gamma_min = np.broadcast_to(np.asarray(cfg["scenario.gamma_min"]), (n,)) \
        if len(cfg["scenario.gamma_min"]) == 1 else np.asarray(cfg["scenario.gamma_min"])
    budget = LinkBudget(
        sigma2=sigma2,
        eps=np.full(n, cfg["scenario.error_prob"]),
        m_d=cfg["scenario.blocklength"],
        gamma_min=np.array(gamma_min, dtype=float),
        p_max=_dbm_to_watts(cfg["scenario.p_max_dbm"]),
    )
    spacing = cfg["scenario.spacing_wavelengths"] * lam
    return EnvConfig(
        p_y=cfg["scenario.p_y"], p_z=cfg["scenario.p_z"], f=cfg["scenario.f"],
        n=n, d=cfg["scenario.d"], budget=budget,
        x_max=cfg["scenario.x_max_wavelengths"] * lam,
        wavelength=lam, r_y=spacing, r_z=spacing,
        episode_len=cfg["scenario.episode_len"],
        redraw_per_episode=cfg["scenario.redraw_per_episode"],
        pathloss_l0=cfg["scenario.pathloss_l0"],
        pathloss_d0=cfg["scenario.pathloss_d0"],
        pathloss_exp=cfg["scenario.pathloss_exp"],
        dist_bs_user=cfg["scenario.dist_bs_user"],
        dist_bs_ris=cfg["scenario.dist_bs_ris"],
        dist_ris_user=cfg["scenario.dist_ris_user"],
    )


def td3_params_from(cfg: ExperimentConfig) -> Td3Params:
    return Td3Params(
        gamma=cfg["agent.gamma"], tau1=cfg["agent.tau1"], tau2=cfg["agent.tau2"],
        policy_delay=cfg["agent.policy_delay"], noise_sigma=cfg["agent.noise_sigma"],
        noise_clip=cfg["agent.noise_clip"], expl_sigma=cfg["agent.expl_sigma"],
        lr=cfg["agent.lr"], meta_lr=cfg["agent.meta_lr"],
        batch_size=cfg["agent.batch_size"], buffer_capacity=cfg["agent.buffer_capacity"],
        warmup_steps=cfg["agent.warmup_steps"], hidden=cfg["agent.hidden"],
        meta_hidden=cfg["agent.meta_hidden"], first_order_meta=cfg["agent.first_order_meta"],
    )


def resolve_output_dir(cfg: ExperimentConfig, out_dir=None) -> Path:
    if out_dir:
        path = Path(out_dir)
    elif cfg["run.output_dir"]:
        path = Path(cfg["run.output_dir"])
    elif os.environ.get(OUTPUT_ENV_VAR):
        path = Path(os.environ[OUTPUT_ENV_VAR])
    else:
        path = Path.cwd()
    path.mkdir(parents=True, exist_ok=True)
    return path


def _meta_line(cfg: ExperimentConfig) -> str:
    seeds = ",".join(str(s) for s in cfg["run.seeds"])
    return f"# config_hash={config_hash(cfg)} seeds={seeds}"


def _write_csv(path: Path, meta: str, header, rows) -> None:
    lines = [meta, ",".join(header)]
    lines.extend(",".join(_fmt(cell) for cell in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def smoothed(values, window: int = SMOOTH_WINDOW):
    """Trailing mean over the last `window` entries (shorter at the start)."""
    out = []
    for i in range(len(values)):
        lo = max(0, i + 1 - window)
        out.append(float(np.mean(values[lo:i + 1])))
    return out


def _train_one(cfg: ExperimentConfig, env_cfg: EnvConfig, agent_kind: str, seed: int):
    stream = PrngStream(seed)
    env = FimStarEnv(env_cfg, stream.substream(_SUB_ENV))
    return train(env, agent_kind, cfg["run.episodes"], stream, td3_params_from(cfg))


def run_convergence(cfg: ExperimentConfig, out_dir=None, save_checkpoints: bool = True):
    """Train every requested agent kind over the seed list; emit the reward CSV.

    Rows are (agent, seed, episode, episode_reward, smoothed_reward), sorted;
    learned agents also leave a checkpoint per (agent, seed) in the output
    directory. Returns (csv_path, results) with the raw TrainResults keyed
    by (agent, seed).
    """
    if cfg["sweep.kind"] != "none":
        raise ConfigError("run_convergence expects sweep.kind = none")
    out = resolve_output_dir(cfg, out_dir)
    rows = []
    results = {}
    for agent_kind in sorted(cfg["run.agents"]):
        for seed in cfg["run.seeds"]:
            result = _train_one(cfg, env_config_from(cfg), agent_kind, seed)
            results[(agent_kind, seed)] = result
            smooth = smoothed(result.episode_rewards)
            for ep, (raw, sm) in enumerate(zip(result.episode_rewards, smooth)):
                rows.append((agent_kind, seed, ep, float(raw), sm))
            if save_checkpoints and result.agent is not None:
                result.save_checkpoint(out / f"checkpoint_{agent_kind}_seed{seed}.npz")
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    path = out / "convergence.csv"
    _write_csv(path, _meta_line(cfg),
               ("agent", "seed", "episode", "episode_reward", "smoothed_reward"), rows)
    return path, results


def evaluate_policy(agent, env_cfg: EnvConfig, stream: PrngStream, draws: int):
    """Final-policy metric: per-draw clamped sum rate after a deterministic
    rollout on a fresh channel realization; one entry per draw."""
    env = FimStarEnv(env_cfg, stream)
    adim = action_dim(env_cfg)
    out = np.zeros(draws)
    for i in range(draws):
        state = env.reset()
        gen = stream.substream(10_000 + i).generator()  # only used by random policies
        rate = 0.0
        for _ in range(env_cfg.episode_len):
            if agent is None:
                a = gen.uniform(-1.0, 1.0, size=adim)
            else:
                a = agent.act(state)
            _, report = env.evaluate_action(a)
            rate = report.clamped_sum_rate()
            state, _, done = env.step(a)
            if done:
                break
        out[i] = rate
    return out


def _sweep_config(cfg: ExperimentConfig, value: float) -> ExperimentConfig:
    kind = cfg["sweep.kind"]
    if kind == "power":
        return cfg.with_overrides(**{"scenario.p_max_dbm": float(value)})
    if kind == "sinr_min":
        return cfg.with_overrides(**{"scenario.gamma_min": (10.0 ** (float(value) / 10.0),)})
    if kind == "ris_elements":
        return cfg.with_overrides(**{"scenario.f": int(value)})
    raise ConfigError(f"not a sweepable kind: {kind}")


def run_sweep(cfg: ExperimentConfig, out_dir=None):
    """Retrain per grid point and agent/seed; evaluate each final policy on
    fresh channel draws. Rows are (agent, seed, sweep_value, mean_sum_rate).

    The evaluation stream depends only on the seed, so grid points share
    their evaluation channels (common random numbers) whenever the scenario
    dimensions allow it. Returns (csv_path, per_draw) where per_draw maps
    (agent, seed, value) to the individual draw metrics.
    """
    if cfg["sweep.kind"] == "none":
        raise ConfigError("run_sweep needs sweep.kind in {power, sinr_min, ris_elements}")
    out = resolve_output_dir(cfg, out_dir)
    rows = []
    per_draw = {}
    for value in cfg["sweep.grid"]:
        point_cfg = _sweep_config(cfg, value)
        env_cfg = env_config_from(point_cfg)
        for agent_kind in sorted(cfg["run.agents"]):
            for seed in cfg["run.seeds"]:
                result = _train_one(point_cfg, env_cfg, agent_kind, seed)
                rates = evaluate_policy(result.agent, env_cfg,
                                        PrngStream(seed).substream(EVAL_STREAM_LABEL),
                                        cfg["run.eval_draws"])
                per_draw[(agent_kind, seed, float(value))] = rates
                rows.append((agent_kind, seed, float(value), float(rates.mean())))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    path = out / f"sweep_{cfg['sweep.kind']}.csv"
    _write_csv(path, _meta_line(cfg),
               ("agent", "seed", "sweep_value", "mean_sum_rate"), rows)
    return path, per_draw
