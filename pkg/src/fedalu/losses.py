"""Cross-entropy, temperature-scaled KL distillation, and their logit gradients.

All functions act on the last axis, so a single logit vector ``(C,)`` and a
batch ``(n, C)`` are both accepted. Batched losses come back per row.
"""

from __future__ import annotations

import numpy as np


def _as_logits(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    if not np.isfinite(z).all():
        raise FloatingPointError("logits contain NaN or Inf")
    return z


def _check_tau(tau: float) -> None:
    if not tau > 0:
        raise ValueError(f"temperature must be positive, got {tau}")


def log_softmax(logits, tau: float = 1.0) -> np.ndarray:
    _check_tau(tau)
    z = _as_logits(logits) / tau
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(logits, tau: float = 1.0) -> np.ndarray:
    """Max-shifted softmax of ``logits / tau``."""
    _check_tau(tau)
    z = _as_logits(logits) / tau
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _one_hot(labels, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.dtype.kind not in "iu":
        raise TypeError(f"labels must be integers, got dtype {labels.dtype}")
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError(f"label out of range [0, {num_classes})")
    return np.eye(num_classes)[labels]


def ce_loss(logits, label):
    z = _as_logits(logits)
    onehot = _one_hot(label, z.shape[-1])
    return -(onehot * log_softmax(z)).sum(axis=-1)


def ce_grad(logits, label) -> np.ndarray:
    z = _as_logits(logits)
    return softmax(z) - _one_hot(label, z.shape[-1])


def _check_pair(student, teacher) -> tuple[np.ndarray, np.ndarray]:
    s, t = _as_logits(student), _as_logits(teacher)
    if s.shape != t.shape:
        raise ValueError(f"student logits {s.shape} and teacher logits {t.shape} differ in shape")
    return s, t


def kd_loss(student_logits, teacher_logits, tau: float = 1.0):
    """``tau**2 * KL(softmax(teacher/tau) || softmax(student/tau))``."""
    s, t = _check_pair(student_logits, teacher_logits)
    log_p = log_softmax(t, tau)
    log_q = log_softmax(s, tau)
    return tau**2 * (np.exp(log_p) * (log_p - log_q)).sum(axis=-1)


def kd_grad(student_logits, teacher_logits, tau: float = 1.0) -> np.ndarray:
    # d/ds of tau^2 KL = tau * (q - p); the teacher is a constant
    s, t = _check_pair(student_logits, teacher_logits)
    return tau * (softmax(s, tau) - softmax(t, tau))


def combined_objective(logits, label, teacher_logits, beta: float, tau: float = 1.0):
    """Loss ``CE + beta * KD`` and its logit gradient for one sample.

    With ``teacher_logits=None`` only the cross-entropy term is used.
    """
    if not beta >= 0:
        raise ValueError(f"beta must be non-negative, got {beta}")
    loss = ce_loss(logits, label)
    grad = ce_grad(logits, label)
    if teacher_logits is not None:
        loss = loss + beta * kd_loss(logits, teacher_logits, tau)
        grad = grad + beta * kd_grad(logits, teacher_logits, tau)
    return loss, grad


def batch_objective(logits, labels, teachers, has_teacher, beta: float, tau: float = 1.0):
    """Per-row losses and logit gradients for a minibatch.

    ``teachers`` is ``(n, C)``; rows where ``has_teacher`` is False are
    ignored and fall back to cross-entropy only.
    """
    if not beta >= 0:
        raise ValueError(f"beta must be non-negative, got {beta}")
    z = _as_logits(logits)
    loss = ce_loss(z, labels)
    grad = ce_grad(z, labels)
    mask = np.asarray(has_teacher, dtype=bool)
    if mask.any() and beta > 0:
        idx = np.flatnonzero(mask)
        loss[idx] += beta * kd_loss(z[idx], teachers[idx], tau)
        grad[idx] += beta * kd_grad(z[idx], teachers[idx], tau)
    return loss, grad
