"""Diagnostic classifier: one hidden ReLU layer with dropout over frozen word vectors."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import DegenerateDataset, DimensionMismatch
from .ingest import EmbeddingTable
from .taskgen import SPLITS, ProbingDataset, ProbingInstance


@dataclass
class ProbeConfig:
    hidden_dim: int = 300
    dropout: float = 0.5
    epochs: int = 20
    patience: int = 5
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.hidden_dim <= 0:
            raise ValueError("hidden_dim must be positive")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must lie in [0, 1)")
        if self.epochs <= 0 or self.batch_size <= 0:
            raise ValueError("epochs and batch_size must be positive")
        if self.patience > self.epochs:
            raise ValueError("patience cannot exceed epochs")


@dataclass
class ProbeReport:
    task: str
    language: str
    embedding: str
    dev_accuracy: float
    test_accuracy: float
    best_epoch: int
    majority_baseline: float
    labels: list[str]
    confusion: list[list[int]]
    oov_rate: float
    epochs_run: int = 0
    dev_history: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    ROW_FIELDS = ("language", "task", "embedding", "dev", "test", "baseline", "best_epoch", "oov")

    def row(self) -> dict:
        return {
            "language": self.language,
            "task": self.task,
            "embedding": self.embedding,
            "dev": round(self.dev_accuracy, 2),
            "test": round(self.test_accuracy, 2),
            "baseline": round(self.majority_baseline, 2),
            "best_epoch": self.best_epoch,
            "oov": round(self.oov_rate, 2),
        }


# ---------------------------------------------------------------------------
# features


def instance_words(instance: ProbingInstance) -> tuple[str, ...]:
    return instance.item.words


def featurize(instance: ProbingInstance, table: EmbeddingTable) -> tuple[np.ndarray, int]:
    """Vector for one instance and the number of its word slots that were OOV.

    Pairs are the concatenation (form1, form2); a token in context uses its own form only.
    """
    vecs, oov = table.lookup_many(instance_words(instance))
    return vecs.reshape(-1), oov


def featurize_split(instances, table: EmbeddingTable) -> tuple[np.ndarray, int, int]:
    if not instances:
        return np.zeros((0, table.dim)), 0, 0
    width = len(instance_words(instances[0]))
    words = [w for inst in instances for w in instance_words(inst)]
    if len(words) != width * len(instances):
        raise DimensionMismatch("instances of mixed kinds in one split")
    vecs, oov = table.lookup_many(words)
    return vecs.reshape(len(instances), width * table.dim), oov, len(words)


def load_instance_vectors(path, n_rows: int | None = None) -> np.ndarray:
    """Read ``instance_id<TAB>v1 ... vd`` lines; ids are 1-based line numbers of the split file."""
    rows = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            head, _, rest = line.partition("\t")
            values = [float(v) for v in rest.split()]
            if dim is None:
                dim = len(values)
            if len(values) != dim:
                raise DimensionMismatch(f"{len(values)} values, expected {dim}", line=lineno, path=path)
            rows[int(head)] = values
    n = n_rows if n_rows is not None else len(rows)
    if set(rows) != set(range(1, n + 1)):
        raise DimensionMismatch(f"expected ids 1..{n}", path=path)
    return np.array([rows[i] for i in range(1, n + 1)], dtype=np.float64).reshape(n, dim or 0)


# ---------------------------------------------------------------------------
# network


class MLP:
    """input -> hidden (ReLU, inverted dropout) -> softmax; float64 throughout."""

    def __init__(self, n_in: int, n_hidden: int, n_out: int, rng: np.random.Generator):
        b1 = 1.0 / math.sqrt(n_in)
        b2 = 1.0 / math.sqrt(n_hidden)
        self.params = {
            "W1": rng.uniform(-b1, b1, (n_in, n_hidden)),
            "b1": rng.uniform(-b1, b1, n_hidden),
            "W2": rng.uniform(-b2, b2, (n_hidden, n_out)),
            "b2": rng.uniform(-b2, b2, n_out),
        }

    def logits(self, X):
        p = self.params
        h = np.maximum(X @ p["W1"] + p["b1"], 0.0)
        return h @ p["W2"] + p["b2"]

    def predict(self, X):
        return np.argmax(self.logits(X), axis=1)

    def loss_and_grads(self, X, y, dropout=0.0, rng=None):
        """Mean cross-entropy and its gradients with respect to every parameter."""
        p = self.params
        n = X.shape[0]
        z = X @ p["W1"] + p["b1"]
        h = np.maximum(z, 0.0)
        if dropout > 0:
            mask = (rng.random(h.shape) >= dropout) / (1.0 - dropout)
            h_drop = h * mask
        else:
            mask = None
            h_drop = h
        out = h_drop @ p["W2"] + p["b2"]
        out = out - out.max(axis=1, keepdims=True)
        exp = np.exp(out)
        probs = exp / exp.sum(axis=1, keepdims=True)
        loss = -np.mean(np.log(probs[np.arange(n), y] + 1e-300))

        d_out = probs
        d_out[np.arange(n), y] -= 1.0
        d_out /= n
        grads = {"W2": h_drop.T @ d_out, "b2": d_out.sum(axis=0)}
        d_h = d_out @ p["W2"].T
        if mask is not None:
            d_h = d_h * mask
        d_z = d_h * (z > 0)
        grads["W1"] = X.T @ d_z
        grads["b1"] = d_z.sum(axis=0)
        return loss, grads

    def copy_params(self):
        return {k: v.copy() for k, v in self.params.items()}


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1 - self.beta1 ** self.t
        c2 = 1 - self.beta2 ** self.t
        for k, g in grads.items():
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


# ---------------------------------------------------------------------------
# training


def majority_baseline(ds: ProbingDataset) -> float:
    """Test accuracy (percent) of always predicting the most frequent training label."""
    counts = Counter(ds.labels("train"))
    if not counts:
        return 0.0
    top = max(counts.values())
    label = min(l for l, c in counts.items() if c == top)
    test = ds.labels("test")
    if not test:
        return 0.0
    return 100.0 * sum(1 for l in test if l == label) / len(test)


def _confusion(y_true, y_pred, n_labels):
    m = np.zeros((n_labels, n_labels), dtype=np.int64)
    np.add.at(m, (y_true, y_pred), 1)
    return m


def _accuracy(conf):
    total = conf.sum()
    return float(100.0 * np.trace(conf) / total) if total else 0.0


def train_probe(ds: ProbingDataset, table: EmbeddingTable | None, cfg: ProbeConfig,
                instance_vectors: dict[str, np.ndarray] | None = None,
                embedding: str | None = None) -> ProbeReport:
    """Train on ``train``, early-stop on ``dev`` accuracy, report dev and test at the best epoch.

    ``instance_vectors`` (split -> matrix aligned with the split's instances)
    replaces table lookups, e.g. for contextual vectors dumped by an external encoder.
    """
    labels = list(ds.label_set)
    if len(labels) < 2 or len(set(ds.labels("train"))) < 2:
        raise DegenerateDataset(f"{ds.task}: need at least two labels to train a probe")
    for s in SPLITS:
        if not ds.splits[s]:
            raise DegenerateDataset(f"{ds.task}: split {s!r} is empty")
    index = {l: i for i, l in enumerate(labels)}

    X, y = {}, {}
    oov = slots = 0
    for s in SPLITS:
        if instance_vectors is not None:
            X[s] = np.asarray(instance_vectors[s], dtype=np.float64)
            if X[s].shape[0] != len(ds.splits[s]):
                raise DimensionMismatch(f"{s}: {X[s].shape[0]} vectors for {len(ds.splits[s])} instances")
        else:
            X[s], o, n = featurize_split(ds.splits[s], table)
            oov += o
            slots += n
        y[s] = np.array([index[l] for l in ds.labels(s)], dtype=np.int64)
    widths = {X[s].shape[1] for s in SPLITS}
    if len(widths) != 1:
        raise DimensionMismatch(f"splits featurize to different widths {sorted(widths)}")

    rng = np.random.default_rng(cfg.seed)
    net = MLP(X["train"].shape[1], cfg.hidden_dim, len(labels), rng)
    opt = Adam(net.params, lr=cfg.learning_rate)
    best_acc, best_epoch, best_params = -1.0, 0, net.copy_params()
    history = []
    wait = 0
    epoch = 0
    n_train = X["train"].shape[0]
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n_train)
        for start in range(0, n_train, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            _, grads = net.loss_and_grads(X["train"][idx], y["train"][idx], cfg.dropout, rng)
            opt.step(net.params, grads)
        dev_acc = _accuracy(_confusion(y["dev"], net.predict(X["dev"]), len(labels)))
        history.append(dev_acc)
        if dev_acc > best_acc:
            best_acc, best_epoch, best_params = dev_acc, epoch, net.copy_params()
            wait = 0
        else:
            wait += 1
            if wait >= cfg.patience:
                break
    net.params = best_params
    conf = _confusion(y["test"], net.predict(X["test"]), len(labels))
    return ProbeReport(
        task=ds.task,
        language=ds.language,
        embedding=embedding or (getattr(table, "name", None) or "vectors"),
        dev_accuracy=best_acc,
        test_accuracy=_accuracy(conf),
        best_epoch=best_epoch,
        majority_baseline=majority_baseline(ds),
        labels=labels,
        confusion=conf.tolist(),
        oov_rate=100.0 * oov / slots if slots else 0.0,
        epochs_run=epoch,
        dev_history=history,
    )


def check_gradients(cfg: ProbeConfig, X: np.ndarray, y: np.ndarray, n_labels: int | None = None,
                    n_checks: int = 200, step: float = 1e-5) -> float:
    """Largest relative error between analytic and central-difference gradients.

    Dropout is disabled.  Relative error is ``|a - n| / max(|a|, |n|, 1e-6)`` so
    exactly-zero gradients (inactive ReLU units) compare as equal.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n_labels = n_labels or int(y.max()) + 1
    rng = np.random.default_rng(cfg.seed)
    net = MLP(X.shape[1], cfg.hidden_dim, n_labels, rng)
    _, grads = net.loss_and_grads(X, y)
    worst = 0.0
    names = sorted(net.params)
    for _ in range(n_checks):
        name = names[rng.integers(len(names))]
        param = net.params[name]
        i = tuple(int(rng.integers(s)) for s in param.shape)
        orig = param[i]
        param[i] = orig + step
        up, _ = net.loss_and_grads(X, y)
        param[i] = orig - step
        down, _ = net.loss_and_grads(X, y)
        param[i] = orig
        numeric = (up - down) / (2 * step)
        analytic = grads[name][i]
        err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-6)
        worst = max(worst, err)
    return worst
