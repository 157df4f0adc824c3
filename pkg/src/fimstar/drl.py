"""Twin-critic delayed actor learning, plus the meta-critic extension.

The base agent follows the standard recipe: twin critics with min-of-two
bootstrap targets, clipped Gaussian smoothing noise on target actions, a
delayed actor trained to maximize the first critic, and exponential
moving-average target networks.

The meta variant adds a small learned network (the meta-critic) whose mean
output over (state, actor-action) pairs acts as an auxiliary actor loss.
The meta-critic itself is trained by a bi-level objective: probe the actor
one gradient step ahead (critic-driven step, then meta-driven step), score
both probes on a held-out batch, and descend the tanh-compressed
improvement through the exact second-order path.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import autograd as ag
from .autograd import Tensor, grad
from .env import FimStarEnv, action_dim, state_dim
from .nets import Adam, Mlp, soft_update
from .numerics import PrngStream
from .replay import Batch, ReplayBuffer

__all__ = [
    "Td3Params",
    "Td3Agent",
    "MetaTd3Agent",
    "TrainResult",
    "train",
    "target_action",
    "critic_target",
    "meta_loss",
    "save_checkpoint",
    "load_checkpoint",
]

AGENT_KINDS = ("td3", "meta_td3", "random")

# substream labels of a training run
_SUB_AGENT_INIT = 1
_SUB_ACT = 2
_SUB_SAMPLE = 3
_SUB_TARGET_NOISE = 4
_SUB_META_SAMPLE = 5

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class Td3Params:
    """Hyperparameters; defaults follow the reference setup where stated."""

    gamma: float = 0.99          # discount
    tau1: float = 0.005          # critic target EMA factor
    tau2: float = 0.005          # actor target EMA factor
    policy_delay: int = 2
    noise_sigma: float = 0.2     # target smoothing noise scale
    noise_clip: float = 0.5
    expl_sigma: float = 0.1      # behavior noise scale
    lr: float = 1e-4
    meta_lr: float = 1e-4
    batch_size: int = 64
    buffer_capacity: int = 100_000
    warmup_steps: int = 1000
    hidden: tuple = (500, 400, 300)
    meta_hidden: tuple = (64,)
    first_order_meta: bool = False

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("discount must lie in [0, 1)")
        for tau in (self.tau1, self.tau2):
            if not 0.0 < tau <= 1.0:
                raise ValueError("EMA factors must lie in (0, 1]")
        if self.noise_clip <= 0:
            raise ValueError("noise_clip must be positive")
        if self.policy_delay < 1:
            raise ValueError("policy_delay must be >= 1")
        if self.batch_size < 1 or self.buffer_capacity < self.batch_size:
            raise ValueError("need capacity >= batch_size >= 1")
        object.__setattr__(self, "hidden", tuple(self.hidden))
        object.__setattr__(self, "meta_hidden", tuple(self.meta_hidden))


def target_action(actor_target: Mlp, next_states: np.ndarray, params: Td3Params,
                  gen: np.random.Generator) -> np.ndarray:
    """Target-actor output perturbed by clipped Gaussian noise, clipped to [-1,1]."""
    a = Mlp.apply(actor_target.params, next_states, "tanh").data
    if params.noise_sigma > 0 and params.noise_clip > 0:
        noise = gen.normal(0.0, params.noise_sigma, size=a.shape)
        a = a + np.clip(noise, -params.noise_clip, params.noise_clip)
    return np.clip(a, -1.0, 1.0)


def critic_target(rewards, dones, next_states, next_actions, critics_target,
                  gamma: float) -> np.ndarray:
    """Bootstrap target y = r + (1-done) * gamma * min_j Q'_j(s', a~)."""
    sa = np.concatenate([next_states, next_actions], axis=1)
    q1 = Mlp.apply(critics_target[0].params, sa).data[:, 0]
    q2 = Mlp.apply(critics_target[1].params, sa).data[:, 0]
    return np.asarray(rewards) + (1.0 - np.asarray(dones)) * gamma * np.minimum(q1, q2)


def meta_loss(loss_new, loss_old):
    """tanh-compressed held-out improvement; Tensor in, Tensor out."""
    if isinstance(loss_new, Tensor) or isinstance(loss_old, Tensor):
        return ag.tanh(ag.sub(ag.as_tensor(loss_new), ag.as_tensor(loss_old)))
    return math.tanh(loss_new - loss_old)


def _actor_loss(actor_params, critic_params, states) -> Tensor:
    """Critic-driven actor objective: -mean Q1(s, pi(s))."""
    s = ag.as_tensor(states)
    a = Mlp.apply(actor_params, s, "tanh")
    q = Mlp.apply(critic_params, ag.concat([s, a], axis=1))
    return -ag.mean(q)


class Td3Agent:
    kind = "td3"

    def __init__(self, sdim: int, adim: int, params: Td3Params, stream: PrngStream):
        self.sdim, self.adim = sdim, adim
        self.params = params
        gen = stream.generator()
        actor_dims = (sdim, *params.hidden, adim)
        critic_dims = (sdim + adim, *params.hidden, 1)
        self.actor = Mlp(actor_dims, "tanh", gen)
        self.critic1 = Mlp(critic_dims, "identity", gen)
        self.critic2 = Mlp(critic_dims, "identity", gen)
        self.actor_target = Mlp(actor_dims, "tanh", gen)
        self.critic1_target = Mlp(critic_dims, "identity", gen)
        self.critic2_target = Mlp(critic_dims, "identity", gen)
        self.actor.clone_into(self.actor_target)
        self.critic1.clone_into(self.critic1_target)
        self.critic2.clone_into(self.critic2_target)
        self.opt_actor = Adam(self.actor.params, params.lr)
        self.opt_critic1 = Adam(self.critic1.params, params.lr)
        self.opt_critic2 = Adam(self.critic2.params, params.lr)
        self.update_steps = 0
        self.actor_update_steps = 0

    def act(self, state, gen: np.random.Generator | None = None,
            sigma: float = 0.0) -> np.ndarray:
        a = Mlp.apply(self.actor.params, np.asarray(state)[None, :], "tanh").data[0]
        if sigma > 0 and gen is not None:
            a = a + gen.normal(0.0, sigma, size=a.shape)
        return np.clip(a, -1.0, 1.0)

    def update_critics(self, batch: Batch, noise_gen: np.random.Generator):
        a2 = target_action(self.actor_target, batch.next_states, self.params, noise_gen)
        y = critic_target(batch.rewards, batch.dones, batch.next_states, a2,
                          (self.critic1_target, self.critic2_target), self.params.gamma)
        losses = []
        sa = np.concatenate([batch.states, batch.actions], axis=1)
        y_t = Tensor(y[:, None])
        for critic, opt in ((self.critic1, self.opt_critic1),
                            (self.critic2, self.opt_critic2)):
            pred = Mlp.apply(critic.params, sa)
            loss = ag.mean(ag.square(ag.sub(pred, y_t)))
            opt.step(grad(loss, critic.params))
            losses.append(loss.item())
        self.update_steps += 1
        return tuple(losses)

    def update_actor(self, batch: Batch) -> float:
        loss = _actor_loss(self.actor.params, self.critic1.params, batch.states)
        self.opt_actor.step(grad(loss, self.actor.params))
        self.actor_update_steps += 1
        return loss.item()

    def sync_targets(self) -> None:
        soft_update(self.critic1_target, self.critic1, self.params.tau1)
        soft_update(self.critic2_target, self.critic2, self.params.tau1)
        soft_update(self.actor_target, self.actor, self.params.tau2)

    def _networks(self) -> dict:
        return {
            "actor": self.actor, "critic1": self.critic1, "critic2": self.critic2,
            "actor_target": self.actor_target, "critic1_target": self.critic1_target,
            "critic2_target": self.critic2_target,
        }

    def _optimizers(self) -> dict:
        return {"actor": self.opt_actor, "critic1": self.opt_critic1,
                "critic2": self.opt_critic2}


class MetaTd3Agent(Td3Agent):
    kind = "meta_td3"

    def __init__(self, sdim, adim, params, stream):
        super().__init__(sdim, adim, params, stream)
        meta_dims = (sdim + adim, *params.meta_hidden, 1)
        self.meta = Mlp(meta_dims, "identity", stream.substream(0).generator())
        # zero output head: the auxiliary loss starts as a no-op for the actor
        # while its bilevel gradient (a mixed second derivative) is nonzero,
        # so the meta-critic still learns from the first update on
        self.meta.params[-2].data[:] = 0.0
        self.meta.params[-1].data[:] = 0.0
        self.opt_meta = Adam(self.meta.params, params.meta_lr)

    def _meta_aux_loss(self, actor_params, states) -> Tensor:
        s = ag.as_tensor(states)
        a = Mlp.apply(actor_params, s, "tanh")
        return ag.mean(Mlp.apply(self.meta.params, ag.concat([s, a], axis=1)))

    def meta_actor_step(self, b_trn: Batch, lr: float):
        """Two-stage one-step probes of the actor parameters.

        Stage 1 descends the critic-driven loss (phi_old, plain arrays);
        stage 2 additionally descends the meta-critic auxiliary loss,
        keeping the graph so phi_new stays differentiable w.r.t. the
        meta-critic parameters.
        """
        l_actor = _actor_loss(self.actor.params, self.critic1.params, b_trn.states)
        g_actor = grad(l_actor, self.actor.params)
        phi_old = [p.data - lr * g for p, g in zip(self.actor.params, g_actor)]
        phi_old_t = [Tensor(arr) for arr in phi_old]
        aux = self._meta_aux_loss(phi_old_t, b_trn.states)
        if self.params.first_order_meta:
            g_aux = grad(aux, phi_old_t)
            phi_new = [Tensor(p.data - lr * g) for p, g in zip(phi_old_t, g_aux)]
        else:
            g_aux = grad(aux, phi_old_t, create_graph=True)
            phi_new = [ag.sub(p, ag.mul(ag.as_tensor(lr), g))
                       for p, g in zip(phi_old_t, g_aux)]
        return phi_old, phi_new, g_actor

    def update_actor_meta(self, b_trn: Batch, b_val: Batch) -> float:
        """Two-stage probes, meta-critic update, then the combined actor step."""
        lr = self.params.lr
        phi_old, phi_new, g_actor = self.meta_actor_step(b_trn, lr)
        # held-out comparison of the two probes
        l_val_new = _actor_loss(phi_new, self.critic1.params, b_val.states)
        l_val_old = _actor_loss([Tensor(a) for a in phi_old], self.critic1.params,
                                b_val.states).item()
        if self.params.first_order_meta:
            g_meta = self._first_order_meta_grad(b_trn, phi_old, phi_new,
                                                 l_val_new.item(), l_val_old, b_val)
        else:
            l_meta = meta_loss(l_val_new, l_val_old)
            g_meta = grad(l_meta, self.meta.params)
        self.opt_meta.step(g_meta)
        # applied update: combined critic-driven + meta-driven gradient at phi
        aux_at_phi = self._meta_aux_loss(self.actor.params, b_trn.states)
        g_aux_phi = grad(aux_at_phi, self.actor.params)
        total = [ga + gm for ga, gm in zip(g_actor, g_aux_phi)]
        loss_value = _actor_loss(self.actor.params, self.critic1.params,
                                 b_trn.states).item()
        self.opt_actor.step(total)
        self.actor_update_steps += 1
        return loss_value

    def _first_order_meta_grad(self, b_trn, phi_old, phi_new, l_new, l_old, b_val):
        """Directional finite difference in place of the exact mixed second
        derivative: d/dk [grad_phi aux . v] with v the held-out actor gradient."""
        v = grad(_actor_loss(phi_new, self.critic1.params, b_val.states),
                 phi_new)
        v = [np.asarray(g) for g in v]
        vnorm = math.sqrt(sum(float((g**2).sum()) for g in v))
        if vnorm == 0:
            return [np.zeros_like(p.data) for p in self.meta.params]
        alpha = 1e-4 / vnorm
        plus = [Tensor(p + alpha * g) for p, g in zip(phi_old, v)]
        minus = [Tensor(p - alpha * g) for p, g in zip(phi_old, v)]
        g_plus = grad(self._meta_aux_loss(plus, b_trn.states), self.meta.params)
        g_minus = grad(self._meta_aux_loss(minus, b_trn.states), self.meta.params)
        dtanh = 1.0 - math.tanh(l_new - l_old) ** 2
        lr = self.params.lr
        return [dtanh * (-lr) * (gp - gm) / (2 * alpha) for gp, gm in zip(g_plus, g_minus)]

    def _networks(self) -> dict:
        nets = super()._networks()
        nets["meta"] = self.meta
        return nets

    def _optimizers(self) -> dict:
        opts = super()._optimizers()
        opts["meta"] = self.opt_meta
        return opts


@dataclass
class TrainResult:
    agent_kind: str
    episode_rewards: list
    critic_losses: list      # (loss1, loss2) per critic update
    actor_losses: list       # one entry per actor update
    total_env_steps: int
    agent: Optional[Td3Agent]
    _loop: Optional["_TrainLoop"] = None

    @property
    def update_steps(self) -> int:
        return self.agent.update_steps if self.agent else 0

    @property
    def actor_update_steps(self) -> int:
        return self.agent.actor_update_steps if self.agent else 0

    def save_checkpoint(self, path) -> None:
        if self._loop is None:
            raise ValueError("this result does not carry resumable state")
        self._loop.save(path)


class _TrainLoop:
    """Owns the mutable training state so runs can checkpoint and resume.

    All randomness is re-derived from (run stream, counters), so resuming
    at an episode boundary replays bit-identically.
    """

    def __init__(self, env: FimStarEnv, agent_kind: str, params: Td3Params,
                 stream: PrngStream):
        if agent_kind not in AGENT_KINDS:
            raise ValueError(f"agent_kind must be one of {AGENT_KINDS}")
        self.env = env
        self.agent_kind = agent_kind
        self.params = params
        self.stream = stream
        sdim, adim = state_dim(env.cfg), action_dim(env.cfg)
        if agent_kind == "random":
            self.agent = None
        elif agent_kind == "td3":
            self.agent = Td3Agent(sdim, adim, params, stream.substream(_SUB_AGENT_INIT))
        else:
            self.agent = MetaTd3Agent(sdim, adim, params, stream.substream(_SUB_AGENT_INIT))
        self.buffer = ReplayBuffer(params.buffer_capacity, sdim, adim)
        self.global_step = 0
        self.episodes_done = 0
        self.episode_rewards: list = []
        self.critic_losses: list = []
        self.actor_losses: list = []

    def _act_gen(self, step: int) -> np.random.Generator:
        return self.stream.substream(_SUB_ACT).substream(step).generator()

    def run(self, episodes: int) -> TrainResult:
        params = self.params
        while self.episodes_done < episodes:
            s = self.env.reset()
            ep_reward = 0.0
            done = False
            while not done:
                gen = self._act_gen(self.global_step)
                if self.agent is None or self.global_step < params.warmup_steps:
                    a = gen.uniform(-1.0, 1.0, size=action_dim(self.env.cfg))
                else:
                    a = self.agent.act(s, gen, params.expl_sigma)
                s2, r, done = self.env.step(a)
                self.buffer.push(s, a, r, s2, done)
                ep_reward += r
                s = s2
                self.global_step += 1
                self._maybe_update()
            self.episode_rewards.append(ep_reward)
            self.episodes_done += 1
        return TrainResult(self.agent_kind, list(self.episode_rewards),
                           list(self.critic_losses), list(self.actor_losses),
                           self.global_step, self.agent, self)

    def _maybe_update(self) -> None:
        agent, params = self.agent, self.params
        if agent is None or self.global_step < params.warmup_steps:
            return
        if self.buffer.size < params.batch_size:
            return
        upd = agent.update_steps
        sample_gen = self.stream.substream(_SUB_SAMPLE).substream(upd).generator()
        noise_gen = self.stream.substream(_SUB_TARGET_NOISE).substream(upd).generator()
        idx = self.buffer.sample_indices(sample_gen, params.batch_size)
        batch = self.buffer.gather(idx)
        self.critic_losses.append(agent.update_critics(batch, noise_gen))
        if agent.update_steps % params.policy_delay == 0:
            # the critic batch doubles as the actor/meta training batch, so
            # the meta variant differs from plain td3 only through the
            # auxiliary path; the held-out batch is disjoint from it
            if isinstance(agent, MetaTd3Agent) \
                    and self.buffer.size >= 2 * params.batch_size:
                meta_gen = self.stream.substream(_SUB_META_SAMPLE) \
                    .substream(agent.actor_update_steps).generator()
                b_val = self.buffer.sample_excluding(meta_gen, params.batch_size, idx)
                self.actor_losses.append(agent.update_actor_meta(batch, b_val))
            elif isinstance(agent, MetaTd3Agent):
                self.actor_losses.append(Td3Agent.update_actor(agent, batch))
            else:
                self.actor_losses.append(agent.update_actor(batch))
            agent.sync_targets()

    # ------------------------------------------------------------------
    # checkpointing

    def save(self, path) -> None:
        arrays = {}
        meta = {
            "version": CHECKPOINT_VERSION,
            "agent_kind": self.agent_kind,
            "params": asdict(self.params),
            "global_step": self.global_step,
            "episodes_done": self.episodes_done,
            "env_episode_index": self.env.episode_index,
            "stream_seed": str(self.stream.seed),
            "stream_id": str(self.stream.stream_id),
            "env_stream_seed": str(self.env.stream.seed),
            "env_stream_id": str(self.env.stream.stream_id),
            "buffer_size": self.buffer.size,
            "buffer_cursor": self.buffer.cursor,
            "update_steps": self.agent.update_steps if self.agent else 0,
            "actor_update_steps": self.agent.actor_update_steps if self.agent else 0,
        }
        arrays["episode_rewards"] = np.asarray(self.episode_rewards)
        arrays["critic_losses"] = np.asarray(self.critic_losses).reshape(-1, 2) \
            if self.critic_losses else np.zeros((0, 2))
        arrays["actor_losses"] = np.asarray(self.actor_losses)
        for name in ("states", "actions", "rewards", "next_states", "dones"):
            arrays[f"buffer_{name}"] = getattr(self.buffer, name)[:self.buffer.size]
        if self.agent is not None:
            for net_name, net in self.agent._networks().items():
                for i, arr in enumerate(net.param_arrays()):
                    arrays[f"net_{net_name}_{i}"] = arr
            for opt_name, opt in self.agent._optimizers().items():
                state = opt.state_arrays()
                meta[f"adam_t_{opt_name}"] = state["t"]
                for i, (m, v) in enumerate(zip(state["m"], state["v"])):
                    arrays[f"adam_{opt_name}_m_{i}"] = m
                    arrays[f"adam_{opt_name}_v_{i}"] = v
        arrays["meta_json"] = np.frombuffer(
            json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
        np.savez_compressed(path, **arrays)

    @classmethod
    def load(cls, path, env: FimStarEnv) -> "_TrainLoop":
        with np.load(path) as data:
            meta = json.loads(bytes(data["meta_json"]).decode())
            if meta["version"] != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {meta['version']}")
            params = Td3Params(**{k: tuple(v) if isinstance(v, list) else v
                                  for k, v in meta["params"].items()})
            stream = PrngStream(int(meta["stream_seed"]), int(meta["stream_id"]))
            loop = cls(env, meta["agent_kind"], params, stream)
            loop.global_step = int(meta["global_step"])
            loop.episodes_done = int(meta["episodes_done"])
            env.episode_index = int(meta["env_episode_index"])
            env.stream = PrngStream(int(meta["env_stream_seed"]),
                                    int(meta["env_stream_id"]))
            loop.episode_rewards = list(data["episode_rewards"])
            loop.critic_losses = [tuple(row) for row in data["critic_losses"]]
            loop.actor_losses = list(data["actor_losses"])
            size = int(meta["buffer_size"])
            loop.buffer.size = size
            loop.buffer.cursor = int(meta["buffer_cursor"])
            for name in ("states", "actions", "rewards", "next_states", "dones"):
                getattr(loop.buffer, name)[:size] = data[f"buffer_{name}"]
            if loop.agent is not None:
                loop.agent.update_steps = int(meta["update_steps"])
                loop.agent.actor_update_steps = int(meta["actor_update_steps"])
                for net_name, net in loop.agent._networks().items():
                    net.load_arrays([data[f"net_{net_name}_{i}"]
                                     for i in range(len(net.params))])
                for opt_name, opt in loop.agent._optimizers().items():
                    n = len(opt.params)
                    opt.load_state({
                        "t": meta[f"adam_t_{opt_name}"],
                        "m": [data[f"adam_{opt_name}_m_{i}"] for i in range(n)],
                        "v": [data[f"adam_{opt_name}_v_{i}"] for i in range(n)],
                    })
        return loop


def train(env: FimStarEnv, agent_kind: str, episodes: int, stream: PrngStream,
          params: Td3Params | None = None, resume_path=None) -> TrainResult:
    """Off-policy training loop; returns the per-episode reward log.

    Warmup steps act uniformly at random; afterwards critics update every
    step and the actor every policy_delay steps (the meta variant runs its
    two-stage probe + meta update there). agent_kind "random" never learns.
    With resume_path the stored run state wins: agent_kind/params/stream are
    taken from the checkpoint and training continues to `episodes` total.
    """
    if resume_path is not None:
        loop = _TrainLoop.load(resume_path, env)
    else:
        loop = _TrainLoop(env, agent_kind, params or Td3Params(), stream)
    return loop.run(episodes)


def save_checkpoint(result: TrainResult, path) -> None:
    result.save_checkpoint(path)


def load_checkpoint(path, env: FimStarEnv) -> TrainResult:
    """Restore a finished (or partial) run for evaluation or resumption."""
    loop = _TrainLoop.load(path, env)
    return TrainResult(loop.agent_kind, list(loop.episode_rewards),
                       list(loop.critic_losses), list(loop.actor_losses),
                       loop.global_step, loop.agent, loop)
