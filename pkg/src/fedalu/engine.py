"""Federated distillation rounds with accumulated local updates.

Each round ``t``:

1. if ``t`` is an exchange round (``t % s == 0`` and past warm-up), every
   client uploads knowledge from its current model, the server aggregates,
   and every client downloads its view;
2. every client trains locally on ``CE + beta * KD`` against the knowledge
   of round ``t - t % s`` (CE only where no knowledge exists);
3. on evaluation rounds, every client is scored on its test split.
"""

from __future__ import annotations

import hashlib
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import schedule
from .config import RunConfig
from .datasets import ClientPartition, Dataset, load_mnist_idx, make_synthetic, partition_dirichlet
from .knowledge import GlobalKnowledge, aggregate, extract_knowledge, teacher_view
from .losses import batch_objective
from .nn import ModelParams, backward, forward, init_params, sgd_step

log = logging.getLogger(__name__)

KEY_SCALARS = 2


class TrainingAborted(RuntimeError):
    def __init__(self, round_: int, client_id: int, reason: str):
        self.round = round_
        self.client_id = client_id
        super().__init__(f"round {round_}, client {client_id}: {reason}")


def record_cost(records) -> int:
    """Scalars needed to transmit ``records``: the logits plus two key fields each."""
    return sum(len(r.logits) + KEY_SCALARS for r in records)


@dataclass
class CommLedger:
    """Exact count of transmitted scalars, per round and direction.

    ``c0`` is fixed by the first exchange round; every later exchange round
    must cost the same or :meth:`close_round` raises.
    """

    uploaded: dict[int, int] = field(default_factory=dict)
    downloaded: dict[int, int] = field(default_factory=dict)
    c0: int = 0

    def charge(self, t: int, direction: str, records) -> "CommLedger":
        book = {"upload": self.uploaded, "download": self.downloaded}.get(direction)
        if book is None:
            raise ValueError(f"direction must be 'upload' or 'download', got {direction!r}")
        cost = record_cost(records)
        if cost:
            book[t] = book.get(t, 0) + cost
        return self

    def round_total(self, t: int) -> int:
        return self.uploaded.get(t, 0) + self.downloaded.get(t, 0)

    def close_round(self, t: int) -> None:
        cost = self.round_total(t)
        if not cost:
            return
        if not self.c0:
            self.c0 = cost
        elif cost != self.c0:
            raise RuntimeError(f"round {t} exchanged {cost} scalars, first exchange round cost {self.c0}")

    @property
    def total_scalars(self) -> int:
        return sum(self.uploaded.values()) + sum(self.downloaded.values())

    @property
    def total_c0(self) -> float:
        return self.total_scalars / self.c0 if self.c0 else 0.0

    @property
    def exchange_rounds(self) -> list[int]:
        return sorted(set(self.uploaded) | set(self.downloaded))


@dataclass(frozen=True)
class RoundMetrics:
    round: int
    mean_accuracy_pct: float
    cum_comm_c0: float
    wall_seconds: float


@dataclass
class RunResult:
    metrics: list[RoundMetrics]
    client_accuracies: list[float]
    params: list[ModelParams]
    ledger: CommLedger
    # round -> fingerprint of the knowledge distilled against in that round
    knowledge_used: dict[int, str | None]
    knowledge_made: dict[int, str]
    round_losses: dict[int, list[float]]

    @property
    def converged_accuracy(self) -> float:
        return converged_accuracy(self.metrics)

    def accuracy_at_budget(self, budget_c0: float) -> float:
        return accuracy_at_budget(self.metrics, budget_c0)


def converged_accuracy(metrics: list[RoundMetrics]) -> float:
    """Mean accuracy over the final 10% of evaluated rounds (at least one)."""
    n = max(1, math.ceil(0.1 * len(metrics)))
    return float(np.mean([m.mean_accuracy_pct for m in metrics[-n:]]))


def accuracy_at_budget(metrics: list[RoundMetrics], budget_c0: float) -> float:
    """Accuracy of the last evaluated round whose cumulative traffic fits in the budget."""
    within = [m for m in metrics if m.cum_comm_c0 <= budget_c0 + 1e-9]
    if not within:
        raise ValueError(f"no evaluated round fits within {budget_c0} C0")
    return within[-1].mean_accuracy_pct


def derive_seed(seed: int, purpose: str, *ids: int) -> np.random.SeedSequence:
    """Seed for an independent random stream, e.g. one client's shuffling.

    Streams depend only on (seed, purpose, ids), never on worker scheduling.
    """
    tag = int.from_bytes(hashlib.sha256(purpose.encode()).digest()[:4], "big")
    return np.random.SeedSequence([seed, tag, *ids])


def evaluate(params: ModelParams, test: Dataset) -> float:
    """Top-1 accuracy in percent; ties go to the lowest class index."""
    if len(test) == 0:
        raise ValueError("cannot evaluate on an empty test set")
    pred = np.argmax(forward(params, test.features), axis=1)
    return 100.0 * float(np.mean(pred == test.labels))


def train_local_round(
    params: ModelParams,
    train: Dataset,
    teachers: np.ndarray,
    has_teacher: np.ndarray,
    beta: float,
    tau: float,
    lr: float,
    local_epochs: int,
    batch_size: int,
    rng: np.random.Generator,
) -> tuple[ModelParams, float]:
    """Shuffled minibatch SGD on ``CE + beta * KD``; returns new params and the mean batch loss."""
    n = len(train)
    losses = []
    for _ in range(local_epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            x = train.features[idx]
            logits = forward(params, x)
            loss, grad = batch_objective(logits, train.labels[idx], teachers[idx], has_teacher[idx], beta, tau)
            mean_loss = float(loss.mean())
            if not math.isfinite(mean_loss):
                raise FloatingPointError(f"non-finite loss {mean_loss}")
            losses.append(mean_loss)
            params = sgd_step(params, backward(params, x, grad), lr)
    return params, float(np.mean(losses))


def load_dataset(cfg: RunConfig) -> Dataset:
    if cfg.dataset == "mnist":
        data = load_mnist_idx(cfg.mnist_images, cfg.mnist_labels)
    else:
        data = make_synthetic(
            cfg.synthetic_classes, cfg.synthetic_dim, cfg.synthetic_per_class, cfg.synthetic_spread, cfg.seed
        )
    if cfg.subset_size and cfg.subset_size < len(data):
        rng = np.random.default_rng(derive_seed(cfg.seed, "subset"))
        data = data.subset(np.sort(rng.choice(len(data), cfg.subset_size, replace=False)))
    return data


@dataclass
class Federation:
    """Everything a run needs before the first round: data split and initial models."""

    config: RunConfig
    data: Dataset
    partitions: list[ClientPartition]
    eval_sets: list[Dataset]
    init: list[ModelParams]

    @classmethod
    def build(cls, cfg: RunConfig, data: Dataset | None = None) -> "Federation":
        data = load_dataset(cfg) if data is None else data
        parts = partition_dirichlet(data, cfg.clients, cfg.alpha, cfg.test_fraction, seed=cfg.seed)
        if cfg.eval_set == "global":
            shared = data.subset(np.sort(np.concatenate([p.test_ids for p in parts])))
            eval_sets = [shared] * len(parts)
        else:
            eval_sets = [p.test for p in parts]
        init = [
            init_params([data.dim, *hidden, data.num_classes], derive_seed(cfg.seed, "init", p.client_id))
            for p, hidden in zip(parts, cfg.client_hidden_dims())
        ]
        return cls(cfg, data, parts, eval_sets, init)


def run(
    cfg: RunConfig,
    federation: Federation | None = None,
    use_alu: bool = True,
    progress=None,
) -> RunResult:
    """Simulate ``cfg.rounds`` synchronous rounds.

    ``use_alu=False`` is the plain federated-distillation path: knowledge is
    exchanged every round and the schedule module is never consulted. It
    exists so that ``s=1`` can be checked against it bit for bit.
    """
    fed = federation or Federation.build(cfg)
    parts = fed.partitions
    num_classes = fed.data.num_classes
    params = list(fed.init)
    rngs = [np.random.default_rng(derive_seed(cfg.seed, "shuffle", p.client_id)) for p in parts]
    ledger = CommLedger()
    stored: dict[int, GlobalKnowledge] = {}
    knowledge_used: dict[int, str | None] = {}
    knowledge_made: dict[int, str] = {}
    round_losses: dict[int, list[float]] = {}
    metrics: list[RoundMetrics] = []
    client_acc: list[float] = []
    start = time.perf_counter()

    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:

        def per_client(fn, *columns):
            # results come back in client order whatever the completion order
            return list(pool.map(fn, *columns))

        for t in range(cfg.rounds):
            exchange = t >= cfg.warmup_ce_rounds and (schedule.should_exchange(t, cfg.s) if use_alu else True)
            if exchange:
                def upload(k):
                    try:
                        return extract_knowledge(params[k], parts[k], cfg.strategy)
                    except FloatingPointError as exc:
                        raise TrainingAborted(t, parts[k].client_id, str(exc)) from exc

                uploads = per_client(upload, range(len(parts)))
                for recs in uploads:
                    ledger.charge(t, "upload", recs)
                gk = aggregate(t, [r for recs in uploads for r in recs], parts, cfg.strategy)
                for part in parts:
                    ledger.charge(t, "download", gk.served(part.client_id))
                ledger.close_round(t)
                # only the latest knowledge can ever be looked up again
                stored = {t: gk}
                knowledge_made[t] = gk.fingerprint()

            if use_alu:
                gk_now = stored.get(schedule.effective_knowledge_round(t, cfg.s))
            else:
                gk_now = stored.get(t)
            knowledge_used[t] = gk_now.fingerprint() if gk_now is not None else None

            def train_one(k):
                teachers, mask = teacher_view(gk_now, parts[k], num_classes)
                try:
                    return train_local_round(
                        params[k], parts[k].train, teachers, mask, cfg.beta, cfg.tau, cfg.lr,
                        cfg.local_epochs, cfg.batch_size, rngs[k],
                    )
                except FloatingPointError as exc:
                    raise TrainingAborted(t, parts[k].client_id, str(exc)) from exc

            results = per_client(train_one, range(len(parts)))
            params = [p for p, _ in results]
            round_losses[t] = [loss for _, loss in results]

            if t % cfg.eval_every == 0:
                client_acc = per_client(evaluate, params, fed.eval_sets)
                m = RoundMetrics(t, float(np.mean(client_acc)), ledger.total_c0, time.perf_counter() - start)
                metrics.append(m)
                log.debug("round %d acc %.2f comm %.1f C0", t, m.mean_accuracy_pct, m.cum_comm_c0)
                if progress is not None:
                    progress(m)

    if (cfg.rounds - 1) % cfg.eval_every != 0:
        client_acc = [evaluate(p, e) for p, e in zip(params, fed.eval_sets)]
    return RunResult(metrics, client_acc, params, ledger, knowledge_used, knowledge_made, round_losses)
