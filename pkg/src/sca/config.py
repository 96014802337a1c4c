"""JSON experiment configuration."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .datagen import SyntheticSpec
from .errors import ConfigError
from .search import LatentMetric
from .threat import PipelineConfig
from .transform import LearningConfig

LEARNING_KEYS = ("beta1", "beta2", "beta11", "beta12", "beta13",
                 "max_iters", "inner_steps", "step_init", "obj_tol")


@dataclass
class ExperimentConfig:
    data: SyntheticSpec = field(default_factory=SyntheticSpec)
    code_len: int = 64
    s_x: int = 8
    s_p: int = 0
    s_q: int = 0
    s_x_sweep: list = field(default_factory=lambda: [1, 2, 4, 8, 16])
    s_p_sweep: list = field(default_factory=lambda: [0, 8, 16, 24, 32])
    policy: str = "top_s"
    threshold: float = 0.0
    ternary: bool = False
    metric: str | None = None
    radius: float | None = None
    radius_quantile: float | None = None
    epsilon: float = 0.05
    beta: float = 0.5
    gamma: float = 0.5
    sigma_z: float = 0.1
    sigma_z_sweep: list = field(default_factory=lambda: [round(0.1 * i, 1) for i in range(11)])
    n_queries: int = 200
    n_pairs: int = 5000
    recall_r: list = field(default_factory=lambda: [1, 10])
    recall_t: list = field(default_factory=lambda: [1, 10, 100])
    fairness_candidates: int = 10
    fairness_draws: int = 100_000
    learning: dict = field(default_factory=dict)
    scale_beta1: bool = True
    beta_r: float = 1.0
    decoder_beta: float = 0.0
    seed: int = 0
    out_dir: str = "out"

    @classmethod
    def from_dict(cls, raw: dict, seed: int | None = None) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        raw = dict(raw)
        data = dict(raw.pop("data", {}))
        data_keys = {f.name for f in dataclasses.fields(SyntheticSpec)}
        bad = sorted(set(data) - data_keys)
        if bad:
            raise ConfigError(f"unknown key(s) in data: {', '.join(bad)}")
        lbad = sorted(set(raw.get("learning", {})) - set(LEARNING_KEYS))
        if lbad:
            raise ConfigError(f"unknown key(s) in learning: {', '.join(lbad)}")
        if seed is not None:
            # a command-line seed overrides every seed in the file
            raw["seed"] = seed
            data["rng_seed"] = seed
        data.setdefault("rng_seed", raw.get("seed", 0))
        try:
            cfg = cls(data=SyntheticSpec(**data), **raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"data: {exc}") from exc
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path, seed: int | None = None) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        return cls.from_dict(raw, seed)

    def validate(self):
        def need(cond, name, msg):
            if not cond:
                raise ConfigError(f"{name}: {msg}")

        L = self.code_len
        need(isinstance(L, int) and L >= 1, "code_len", "must be a positive integer")
        need(L >= self.data.n_dims, "code_len", f"must be >= data.n_dims={self.data.n_dims}")
        need(1 <= self.s_x <= L, "s_x", f"must lie in [1, code_len={L}]")
        need(0 <= self.s_p <= L - self.s_x, "s_p", f"must lie in [0, code_len - s_x = {L - self.s_x}]")
        need(0 <= self.s_q <= self.s_p, "s_q", f"must lie in [0, s_p = {self.s_p}]")
        need(self.policy in ("top_s", "threshold"), "policy", "must be 'top_s' or 'threshold'")
        need(self.threshold >= 0, "threshold", "must be nonnegative")
        need(not (self.ternary and self.policy != "top_s"), "ternary", "requires policy 'top_s'")
        if self.metric is not None:
            try:
                LatentMetric(self.metric)
            except ValueError:
                raise ConfigError(f"metric: unknown metric {self.metric!r}") from None
        need(self.radius is None or self.radius >= 0, "radius", "must be nonnegative")
        need(self.radius_quantile is None or 0 <= self.radius_quantile <= 1,
             "radius_quantile", "must lie in [0, 1]")
        need(self.epsilon >= 0, "epsilon", "must be nonnegative")
        need(self.beta >= 0, "beta", "must be nonnegative")
        need(0 <= self.gamma <= 1, "gamma", "must lie in [0, 1]")
        need(self.sigma_z >= 0, "sigma_z", "must be nonnegative")
        for name in ("s_x_sweep", "s_p_sweep", "sigma_z_sweep", "recall_r", "recall_t"):
            need(isinstance(getattr(self, name), list) and getattr(self, name), name, "must be a nonempty list")
        need(all(isinstance(v, int) and v >= 0 for v in self.s_p_sweep), "s_p_sweep",
             "values must be nonnegative integers")
        need(all(isinstance(v, int) and v >= 1 for v in self.s_x_sweep), "s_x_sweep",
             "values must be positive integers")
        need(all(z >= 0 for z in self.sigma_z_sweep), "sigma_z_sweep", "values must be nonnegative")
        need(all(r >= 1 for r in self.recall_r), "recall_r", "values must be >= 1")
        need(all(t >= 1 for t in self.recall_t), "recall_t", "values must be >= 1")
        need(self.n_queries >= 1 and self.n_pairs >= 1, "n_queries", "counts must be positive")
        need(2 <= self.fairness_candidates <= self.data.n_points, "fairness_candidates",
             "must lie in [2, n_points]")
        need(self.fairness_draws >= 1, "fairness_draws", "must be positive")
        need(isinstance(self.seed, int) and 0 <= self.seed < 2**64, "seed", "must be an unsigned 64-bit integer")
        try:
            self.learning_config(self.s_x)
        except ValueError as exc:
            raise ConfigError(f"learning: {exc}") from exc

    def check_sweep(self):
        """Feasibility of the (S_x, S_p) grid, needed only by sweep studies."""
        L = self.code_len
        for sx in self.s_x_sweep:
            if sx > L:
                raise ConfigError(f"s_x_sweep: value {sx} exceeds code_len={L}")
            for sp in self.s_p_sweep:
                if sp > L - sx:
                    raise ConfigError(f"s_p_sweep: value {sp} exceeds code_len - s_x = {L - sx}")

    def learning_config(self, s_x: int) -> LearningConfig:
        return LearningConfig(s_x=s_x, rng_seed=self.seed, **self.learning)

    def pipeline(self) -> PipelineConfig:
        return PipelineConfig(
            code_len=self.code_len,
            learning=self.learning_config(self.s_x),
            ternary=self.ternary,
            beta_r=self.beta_r,
            beta=self.decoder_beta,
            scale_beta1=self.scale_beta1,
            seed=self.seed,
        )
