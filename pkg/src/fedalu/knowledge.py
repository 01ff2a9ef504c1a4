"""Logit knowledge: client-side extraction and server-side aggregation.

Two strategies are supported:

``peer_label_avg``
    Each client uploads its mean logits per local label. A requester gets,
    for each of its labels, the unweighted mean of the other clients'
    records for that label.

``sample_cache``
    Each client uploads the logits of every local training sample. A
    requester gets, for each of its training samples, the mean of all
    other clients' per-sample records that share the sample's label.
    Same-label matching stands in for feature-similarity retrieval.

A client never receives knowledge built from its own uploads. Keys with no
peer contribution are simply absent.
"""

from __future__ import annotations

import hashlib
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .datasets import ClientPartition
from .nn import ModelParams, forward


class Strategy(str, Enum):
    PEER_LABEL_AVG = "peer_label_avg"
    SAMPLE_CACHE = "sample_cache"


@dataclass(frozen=True)
class KnowledgeRecord:
    """One transmitted logit vector.

    ``key`` is a label under ``peer_label_avg`` and a global sample id under
    ``sample_cache``; ``label`` is always the class the logits belong to.
    """

    client_id: int
    key: int
    label: int
    logits: np.ndarray


@dataclass(frozen=True)
class GlobalKnowledge:
    round: int
    strategy: Strategy
    table: dict = field(repr=False)

    def served(self, client_id: int) -> list[KnowledgeRecord]:
        """Records downloaded by ``client_id``, in key order."""
        keys = sorted(k for (c, k) in self.table if c == client_id)
        return [KnowledgeRecord(client_id, k, self.table[client_id, k][0], self.table[client_id, k][1]) for k in keys]

    def fingerprint(self) -> str:
        h = hashlib.sha256(f"{self.round}:{self.strategy.value}".encode())
        for key in sorted(self.table):
            label, logits = self.table[key]
            h.update(np.asarray([*key, label], dtype=np.int64).tobytes())
            h.update(logits.tobytes())
        return h.hexdigest()


def extract_knowledge(params: ModelParams, partition: ClientPartition, strategy) -> list[KnowledgeRecord]:
    strategy = Strategy(strategy)
    logits = forward(params, partition.train.features)
    if not np.isfinite(logits).all():
        raise FloatingPointError(f"client {partition.client_id} produced non-finite logits")
    labels = partition.train.labels
    cid = partition.client_id
    if strategy is Strategy.SAMPLE_CACHE:
        return [
            KnowledgeRecord(cid, int(sid), int(y), logits[j])
            for j, (sid, y) in enumerate(zip(partition.train_ids, labels))
        ]
    return [
        KnowledgeRecord(cid, int(y), int(y), logits[labels == y].mean(axis=0))
        for y in np.unique(labels)
    ]


def _group_uploads(uploads, client_ids) -> dict[int, dict[int, list[np.ndarray]]]:
    """client -> label -> logit vectors in ascending key order."""
    by_client: dict[int, dict[int, KnowledgeRecord]] = defaultdict(dict)
    for rec in uploads:
        if rec.key in by_client[rec.client_id]:
            raise ValueError(f"duplicate upload from client {rec.client_id} for key {rec.key}")
        if not np.isfinite(rec.logits).all():
            raise FloatingPointError(f"client {rec.client_id} uploaded non-finite logits")
        by_client[rec.client_id][rec.key] = rec
    missing = sorted(set(client_ids) - set(by_client))
    if missing:
        raise ValueError(f"no uploads from clients {missing}; rounds are synchronous")
    grouped: dict[int, dict[int, list[np.ndarray]]] = {}
    for cid in sorted(by_client):
        per_label: dict[int, list[np.ndarray]] = defaultdict(list)
        for key in sorted(by_client[cid]):
            rec = by_client[cid][key]
            per_label[rec.label].append(rec.logits)
        grouped[cid] = per_label
    return grouped


def aggregate(t: int, uploads, partitions, strategy) -> GlobalKnowledge:
    """Build the knowledge each client downloads in exchange round ``t``.

    Sums run over clients in ascending id order, so the result does not
    depend on the order uploads arrive in.
    """
    strategy = Strategy(strategy)
    client_ids = [p.client_id for p in partitions]
    grouped = _group_uploads(uploads, client_ids)

    if strategy is Strategy.PEER_LABEL_AVG:
        # one vector per (client, label): the client's own upload
        contrib = {cid: {y: vecs[0] for y, vecs in per_label.items()} for cid, per_label in grouped.items()}
    else:
        contrib = {cid: {y: np.sum(vecs, axis=0) for y, vecs in per_label.items()} for cid, per_label in grouped.items()}
        counts = {cid: {y: len(vecs) for y, vecs in per_label.items()} for cid, per_label in grouped.items()}

    table = {}
    for part in partitions:
        k = part.client_id
        peers = [cid for cid in sorted(contrib) if cid != k]
        served_by_label = {}
        for y in np.unique(part.train.labels).tolist():
            have = [cid for cid in peers if y in contrib[cid]]
            if not have:
                continue
            total = np.zeros_like(contrib[have[0]][y])
            for cid in have:
                total = total + contrib[cid][y]
            if strategy is Strategy.PEER_LABEL_AVG:
                served_by_label[y] = total / len(have)
            else:
                served_by_label[y] = total / sum(counts[cid][y] for cid in have)
        if strategy is Strategy.PEER_LABEL_AVG:
            for y, vec in served_by_label.items():
                table[k, y] = (y, vec)
        else:
            for sid, y in zip(part.train_ids.tolist(), part.train.labels.tolist()):
                if y in served_by_label:
                    table[k, sid] = (y, served_by_label[y])
    return GlobalKnowledge(t, strategy, table)


def lookup(gk: GlobalKnowledge, client_id: int, sample_id: int, label: int):
    """Teacher logits for one local sample, or None when no peer knowledge exists."""
    key = label if gk.strategy is Strategy.PEER_LABEL_AVG else sample_id
    entry = gk.table.get((client_id, key))
    return None if entry is None else entry[1]


def teacher_view(gk: GlobalKnowledge | None, partition: ClientPartition, num_classes: int):
    """Dense ``(n, C)`` teacher matrix and presence mask for a client's train set."""
    n = len(partition.train)
    teachers = np.zeros((n, num_classes))
    mask = np.zeros(n, dtype=bool)
    if gk is None:
        return teachers, mask
    for j, (sid, y) in enumerate(zip(partition.train_ids.tolist(), partition.train.labels.tolist())):
        vec = lookup(gk, partition.client_id, sid, y)
        if vec is not None:
            teachers[j] = vec
            mask[j] = True
    return teachers, mask
