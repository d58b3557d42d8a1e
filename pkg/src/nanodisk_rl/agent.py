"""Double deep Q-learning over the nanodisk design lattice.

Reproducibility rests on a single ``numpy.random.Generator`` per run. Draw
order is part of the contract:

1. at construction: one ``integers(2**63)`` for the main-network init seed;
2. at each episode start: four ``integers`` (L, D, NT, AT) for the start state;
3. at each step: one ``random()`` for the epsilon test, then one
   ``integers(9)`` only if exploring;
4. after warm-up, at each step: one ``choice(..., replace=False)`` for the batch.
"""

from __future__ import annotations

import math
import pickle
from collections import deque
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import qnet
from .color import LabColor
from .env import N_ACTIONS, DesignState, NanodiskEnv


@dataclass(frozen=True)
class Transition:
    state_features: np.ndarray
    action: int
    reward: float
    next_state_features: np.ndarray
    terminal: bool


class ReplayMemory:
    """Bounded FIFO of transitions; the oldest is evicted first."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._items: deque[Transition] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def __getitem__(self, i: int) -> Transition:
        return self._items[i]


def remember(memory: ReplayMemory, transition: Transition) -> None:
    memory._items.append(transition)


class WarmupError(RuntimeError):
    pass


def sample_batch(memory: ReplayMemory, batch_size: int, rng: np.random.Generator) -> list[Transition]:
    """Uniform draw without replacement."""
    if len(memory) < batch_size:
        raise WarmupError(f"warm-up not complete: {len(memory)} < batch size {batch_size}")
    idx = rng.choice(len(memory), size=batch_size, replace=False)
    return [memory[int(i)] for i in idx]


@dataclass(frozen=True)
class EpsilonSchedule:
    epsilon_start: float = 1.0
    epsilon_min: float = 0.05
    decay: float = 0.9995

    def __post_init__(self):
        if not 0 < self.epsilon_start <= 1:
            raise ValueError("epsilon_start must be in (0, 1]")
        if not 0 < self.epsilon_min <= self.epsilon_start:
            raise ValueError("epsilon_min must be in (0, epsilon_start]")
        if not 0 < self.decay < 1:
            raise ValueError("decay must be in (0, 1)")


def epsilon_value(schedule: EpsilonSchedule, global_step: int) -> float:
    if global_step < 0:
        raise ValueError("global_step must be >= 0")
    return max(schedule.epsilon_min, schedule.epsilon_start * schedule.decay**global_step)


def greedy_action(q_values) -> int:
    """Argmax with lowest-index tie-breaking."""
    return int(np.argmax(q_values))


def select_action(features, main_params: qnet.NetworkParams, epsilon: float, rng: np.random.Generator) -> int:
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must be in [0, 1]")
    if rng.random() < epsilon:
        return int(rng.integers(N_ACTIONS))
    return greedy_action(qnet.forward(main_params, features))


def _stack(batch: Sequence[Transition]):
    s = np.stack([t.state_features for t in batch])
    a = np.array([t.action for t in batch], dtype=np.int64)
    r = np.array([t.reward for t in batch], dtype=np.float64)
    s2 = np.stack([t.next_state_features for t in batch])
    done = np.array([t.terminal for t in batch], dtype=bool)
    return s, a, r, s2, done


def compute_targets(
    batch: Sequence[Transition],
    main_params: qnet.NetworkParams,
    target_params: qnet.NetworkParams,
    gamma: float,
) -> np.ndarray:
    """Double-DQN Bellman targets.

    The next action is chosen by the main network and valued by the target
    network: ``y = r + gamma * Q_target(s', argmax_a Q_main(s', a))``, or
    ``y = r`` on terminal transitions.
    """
    if not batch:
        raise ValueError("empty batch")
    _, _, r, s2, done = _stack(batch)
    q_main = qnet.forward(main_params, s2)
    q_targ = qnet.forward(target_params, s2)
    if not (np.isfinite(q_main).all() and np.isfinite(q_targ).all()):
        raise FloatingPointError("non-finite Q values while computing targets")
    best = np.argmax(q_main, axis=1)
    bootstrap = q_targ[np.arange(len(batch)), best]
    return np.where(done, r, r + gamma * bootstrap)


def discounted_return(rewards: Iterable[float], gamma: float) -> float:
    total = 0.0
    for r in reversed(list(rewards)):
        total = r + gamma * total
    return total


@dataclass(frozen=True)
class AgentConfig:
    gamma: float = 0.95
    tau: float = 0.05
    batch_size: int = 32
    replay_capacity: int = 5000
    warmup: int = 200
    schedule: EpsilonSchedule = EpsilonSchedule()
    episodes: int = 18
    steps_per_episode: int = 500
    # Output head scaled to the largest discounted return, 800 / (1 - 0.95).
    architecture: qnet.NetworkArchitecture = qnet.NetworkArchitecture(output_scale=16000.0)
    train: qnet.TrainConfig = qnet.TrainConfig(learning_rate=0.1)
    # Start every episode here instead of a random lattice state.
    start_state: Optional[DesignState] = None

    def __post_init__(self):
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must be in [0, 1)")
        if not 0 < self.tau <= 1:
            raise ValueError("tau must be in (0, 1]")
        if self.batch_size < 1 or self.replay_capacity < self.batch_size:
            raise ValueError("need 1 <= batch_size <= replay_capacity")
        if self.episodes < 1 or self.steps_per_episode < 1:
            raise ValueError("episodes and steps_per_episode must be >= 1")

    @property
    def total_steps(self) -> int:
        return self.episodes * self.steps_per_episode


@dataclass(frozen=True)
class StepRecord:
    episode: int
    step: int
    global_step: int
    state: dict
    action: int
    epsilon: float
    reward: float
    delta_e: float
    lab: tuple
    clamped: bool
    loss: Optional[float]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RunReport:
    best_state: Optional[DesignState] = None
    best_delta_e: float = math.inf
    best_lab: Optional[LabColor] = None
    records: list[StepRecord] = field(default_factory=list)

    def add(self, rec: StepRecord, state: DesignState, lab: LabColor) -> None:
        self.records.append(rec)
        if rec.delta_e < self.best_delta_e:
            self.best_delta_e = rec.delta_e
            self.best_state = state
            self.best_lab = lab


class TrainingAborted(RuntimeError):
    def __init__(self, message: str, record: dict):
        super().__init__(message)
        self.record = record


class Trainer:
    """Resumable double-DQN training loop over a :class:`NanodiskEnv`.

    Per step: epsilon-greedy action, environment step, store transition,
    and once ``warmup`` transitions are stored: sample batch, double-DQN
    targets, one SGD step on the main network, soft update of the target.
    """

    def __init__(self, env: NanodiskEnv, config: AgentConfig = AgentConfig(), seed: int = 0):
        self.env = env
        self.config = config
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        init_seed = int(self.rng.integers(2**63))
        self.main = qnet.init_params(config.architecture, init_seed)
        self.target = self.main
        self.memory = ReplayMemory(config.replay_capacity)
        self.global_step = 0
        self.state: Optional[DesignState] = None
        self.report = RunReport()

    @property
    def done(self) -> bool:
        return self.global_step >= self.config.total_steps

    def _warm(self) -> bool:
        return len(self.memory) >= max(self.config.warmup, self.config.batch_size)

    def step(self) -> StepRecord:
        cfg = self.config
        episode, t = divmod(self.global_step, cfg.steps_per_episode)
        if t == 0:
            self.state = self.env.reset(state=cfg.start_state, rng=self.rng if cfg.start_state is None else None)
        state = self.state
        features = self.env.encode(state)
        eps = epsilon_value(cfg.schedule, self.global_step)
        action = select_action(features, self.main, eps, self.rng)
        res = self.env.step(state, action)
        terminal = t == cfg.steps_per_episode - 1
        remember(
            self.memory,
            Transition(features, action, res.reward, self.env.encode(res.next_state), terminal),
        )

        loss = None
        if self._warm():
            batch = sample_batch(self.memory, cfg.batch_size, self.rng)
            y = compute_targets(batch, self.main, self.target, cfg.gamma)
            s, a, *_ = _stack(batch)
            main, loss = qnet.train_batch(self.main, s, a, y, cfg.train)
            if not (math.isfinite(loss) and main.all_finite()):
                raise TrainingAborted(
                    f"non-finite loss at global step {self.global_step}",
                    {"global_step": self.global_step, "episode": episode, "step": t, "loss": loss},
                )
            self.main = main
            self.target = qnet.soft_update(self.target, self.main, cfg.tau)

        rec = StepRecord(
            episode=episode,
            step=t,
            global_step=self.global_step,
            state=res.next_state.as_dict(),
            action=action,
            epsilon=eps,
            reward=res.reward,
            delta_e=res.delta_e,
            lab=tuple(res.lab),
            clamped=res.clamped,
            loss=loss,
        )
        self.report.add(rec, res.next_state, res.lab)
        self.state = res.next_state
        self.global_step += 1
        return rec

    def run(self, max_steps: Optional[int] = None) -> RunReport:
        n = 0
        while not self.done and (max_steps is None or n < max_steps):
            self.step()
            n += 1
        return self.report

    # -- checkpointing -------------------------------------------------
    # The environment (solver tables, target) is not stored; pass the same one to load().
    def save(self, path) -> None:
        blob = {
            "config": self.config,
            "seed": self.seed,
            "rng": self.rng.bit_generator.state,
            "main": self.main,
            "target": self.target,
            "memory": list(self.memory),
            "global_step": self.global_step,
            "state": self.state,
            "report": self.report,
        }
        with open(Path(path), "wb") as fh:
            pickle.dump(blob, fh, protocol=pickle.HIGHEST_PROTOCOL)

    @classmethod
    def load(cls, path, env: NanodiskEnv) -> "Trainer":
        with open(Path(path), "rb") as fh:
            blob = pickle.load(fh)
        tr = cls.__new__(cls)
        tr.env = env
        tr.config = blob["config"]
        tr.seed = blob["seed"]
        tr.rng = np.random.default_rng()
        tr.rng.bit_generator.state = blob["rng"]
        tr.main = blob["main"]
        tr.target = blob["target"]
        tr.memory = ReplayMemory(tr.config.replay_capacity)
        for t in blob["memory"]:
            remember(tr.memory, t)
        tr.global_step = blob["global_step"]
        tr.state = blob["state"]
        tr.report = blob["report"]
        return tr


def train_run(env: NanodiskEnv, config: AgentConfig = AgentConfig(), seed: int = 0) -> RunReport:
    return Trainer(env, config, seed).run()
