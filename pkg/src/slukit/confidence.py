"""Word-confidence estimation for recognizer output.

Two measures are produced per hypothesized word: the confusion-network
posterior (computed in `alignment`) and the softmax-Correct score of a
multi-stream MLP error detector trained on words flagged correct/error.
The MLP's word representation is the bottleneck of an autoencoder that
fuses several word embedding tables into one compact vector.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import modelio
from .corpus import Dataset, Utterance
from .numutil import rng_for, softmax

LM_FULL, LM_BACKOFF, LM_UNKNOWN = 0, 1, 2
PAD = "<pad>"


class ConfidenceError(Exception):
    pass


# ---------------------------------------------------------------------------
# Embedding tables
# ---------------------------------------------------------------------------

class EmbeddingTable:
    """vocabulary -> fixed-dimension vectors with a total OOV policy."""

    def __init__(self, words, matrix, oov="zero", name=""):
        self.words = list(words)
        self.matrix = np.asarray(matrix, dtype=np.float64)
        if self.matrix.ndim != 2 or len(self.words) != self.matrix.shape[0]:
            raise ConfidenceError("embedding matrix does not match vocabulary")
        if oov not in ("zero", "unk"):
            raise ConfidenceError(f"unknown OOV policy {oov!r}")
        if oov == "unk" and "<unk>" not in words:
            raise ConfidenceError("OOV policy 'unk' needs a <unk> row")
        self.oov = oov
        self.name = name
        self._index = {w: i for i, w in enumerate(self.words)}

    def __len__(self):
        return len(self.words)

    @property
    def dim(self):
        return self.matrix.shape[1]

    def lookup(self, word):
        i = self._index.get(word)
        if i is not None:
            return self.matrix[i]
        if self.oov == "unk":
            return self.matrix[self._index["<unk>"]]
        return np.zeros(self.dim)


def load_embeddings(path, oov="zero", name="") -> EmbeddingTable:
    """Text format: one "word v1 v2 ... vd" per line, space separated.

    The dimension is fixed by the first row; rows that disagree are a
    format error.  A repeated word wins with its last row (warned).
    """
    words, rows = [], []
    index = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            parts = raw.rstrip("\n").split(" ")
            if len(parts) < 2:
                raise ConfidenceError(f"{path} line {lineno}: no vector components")
            word, comps = parts[0], parts[1:]
            try:
                vec = [float(c) for c in comps]
            except ValueError as exc:
                raise ConfidenceError(f"{path} line {lineno}: bad float") from exc
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise ConfidenceError(
                    f"{path} line {lineno}: dimension {len(vec)} != {dim}")
            if word in index:
                warnings.warn(f"{path}: duplicate word {word!r}, keeping last")
                rows[index[word]] = vec
            else:
                index[word] = len(words)
                words.append(word)
                rows.append(vec)
    return EmbeddingTable(words, np.array(rows, dtype=np.float64), oov=oov,
                          name=name or str(path))


def write_embeddings(table: EmbeddingTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for w, row in zip(table.words, table.matrix):
            fh.write(w + " " + " ".join(f"{v:.6f}" for v in row) + "\n")


def make_hash_embeddings(vocab, dim, name, seed) -> EmbeddingTable:
    """Deterministic pseudo-embedding table (a stand-in for externally
    trained tables, which are consumed as files)."""
    vocab = sorted(set(vocab))
    rows = np.stack([rng_for("emb", name, seed, w).normal(0.0, 0.3, size=dim)
                     for w in vocab])
    return EmbeddingTable(vocab, rows, name=name)


# ---------------------------------------------------------------------------
# Autoencoder fusion
# ---------------------------------------------------------------------------

@dataclass
class AutoencoderModel:
    w_enc: np.ndarray  # (d, Din)
    b_enc: np.ndarray  # (d,)
    w_dec: np.ndarray  # (Din, d)
    b_dec: np.ndarray  # (Din,)
    source_names: tuple
    source_dims: tuple

    @property
    def bottleneck(self):
        return self.w_enc.shape[0]

    def encode(self, x):
        return np.tanh(x @ self.w_enc.T + self.b_enc)

    def decode(self, h):
        return h @ self.w_dec.T + self.b_dec

    def save(self, path):
        header = {"source_names": list(self.source_names),
                  "source_dims": list(self.source_dims),
                  "bottleneck": int(self.bottleneck)}
        modelio.save_blob(path, "autoencoder", header, {
            "w_enc": self.w_enc, "b_enc": self.b_enc,
            "w_dec": self.w_dec, "b_dec": self.b_dec,
        })

    @classmethod
    def load(cls, path):
        header, arrays = modelio.load_blob(path, "autoencoder")
        return cls(arrays["w_enc"], arrays["b_enc"], arrays["w_dec"],
                   arrays["b_dec"], tuple(header["source_names"]),
                   tuple(header["source_dims"]))


def _init_ae(din, d, seed) -> AutoencoderModel:
    rng = rng_for("ae", seed)
    lim_e = np.sqrt(6.0 / (din + d))
    lim_d = np.sqrt(6.0 / (d + din))
    return AutoencoderModel(
        w_enc=rng.uniform(-lim_e, lim_e, size=(d, din)),
        b_enc=np.zeros(d),
        w_dec=rng.uniform(-lim_d, lim_d, size=(din, d)),
        b_dec=np.zeros(din),
        source_names=(), source_dims=(),
    )


def ae_loss_and_grads(model: AutoencoderModel, x):
    """Mean squared reconstruction over a batch, with gradients."""
    pre = x @ model.w_enc.T + model.b_enc
    h = np.tanh(pre)
    y = h @ model.w_dec.T + model.b_dec
    diff = y - x
    loss = float(np.mean(diff ** 2))
    dy = 2.0 * diff / diff.size
    grads = {
        "w_dec": dy.T @ h,
        "b_dec": dy.sum(axis=0),
    }
    dh = dy @ model.w_dec
    dpre = dh * (1.0 - h ** 2)
    grads["w_enc"] = dpre.T @ x
    grads["b_enc"] = dpre.sum(axis=0)
    return loss, grads


def shared_vocabulary(tables):
    vocab = set(tables[0].words)
    for t in tables[1:]:
        vocab &= set(t.words)
    return sorted(vocab)


def concat_vectors(tables, words):
    return np.stack([np.concatenate([t.lookup(w) for t in tables]) for w in words])


def train_autoencoder(tables, d, epochs=300, lr=0.05, batch=32, seed=0):
    """Fit the fusion autoencoder on the tables' shared vocabulary.

    Plain mini-batch gradient descent on mean squared reconstruction;
    the concatenation order of the source tables is part of the model
    and round-trips through its file.  Returns (model, final mse).
    """
    if len(tables) < 2:
        raise ConfidenceError("need at least two embedding tables to fuse")
    if d < 1:
        raise ConfidenceError(f"bottleneck must be >= 1, got {d}")
    vocab = shared_vocabulary(tables)
    if not vocab:
        raise ConfidenceError("embedding tables share no vocabulary")
    x = concat_vectors(tables, vocab)
    model = _init_ae(x.shape[1], d, seed)
    model.source_names = tuple(t.name for t in tables)
    model.source_dims = tuple(t.dim for t in tables)
    rng = rng_for("ae-shuffle", seed)
    for _ in range(epochs):
        order = rng.permutation(len(x))
        for s in range(0, len(x), batch):
            xb = x[order[s:s + batch]]
            _, grads = ae_loss_and_grads(model, xb)
            for name, g in grads.items():
                setattr(model, name, getattr(model, name) - lr * g)
    loss = ae_loss_and_grads(model, x)[0]
    return model, loss


def fuse_word(model: AutoencoderModel, tables, word):
    """Bottleneck activation of the word's concatenated embeddings."""
    x = np.concatenate([t.lookup(word) for t in tables])
    return np.tanh(x @ model.w_enc.T + model.b_enc)


def build_fused_table(model: AutoencoderModel, tables, vocab) -> EmbeddingTable:
    vocab = sorted(set(vocab))
    mat = model.encode(concat_vectors(tables, vocab))
    return EmbeddingTable(vocab, mat, name="fused")


# ---------------------------------------------------------------------------
# Language-model backoff surrogate
# ---------------------------------------------------------------------------

BOS = "<s>"


def collect_ngrams(dataset: Dataset):
    """Unigram and bigram inventories of a (training) corpus."""
    unigrams, bigrams = set(), set()
    for utt in dataset:
        prev = BOS
        for tok in utt.tokens:
            w = tok.surface.lower()
            unigrams.add(w)
            bigrams.add((prev, w))
            prev = w
    return frozenset(unigrams), frozenset(bigrams)


def lm_category(prev_word, word, unigrams, bigrams) -> int:
    w = word.lower()
    if (prev_word.lower(), w) in bigrams:
        return LM_FULL
    if w in unigrams:
        return LM_BACKOFF
    return LM_UNKNOWN


# ---------------------------------------------------------------------------
# Multi-stream MLP error detector
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MsMlpConfig:
    proj: int = 16
    merge: int = 64
    hidden: int = 32
    window: int = 2
    epochs: int = 10
    lr: float = 0.3
    batch: int = 64
    seed: int = 0


class MsMlpVectorizer:
    """Turns tokens into the detector's input streams.

    Streams, in fixed order: fused embeddings of the word and its +-2
    neighbors (padding vector at sentence boundaries), word length,
    LM-backoff behaviour, POS, dependency relation, and governor POS.
    """

    def __init__(self, fused: EmbeddingTable, pos_vocab, deprel_vocab,
                 unigrams, bigrams, window=2):
        self.fused = fused
        self.pos_vocab = list(pos_vocab)
        self.deprel_vocab = list(deprel_vocab)
        self.unigrams = frozenset(unigrams)
        self.bigrams = frozenset(bigrams)
        self.window = window
        self._pos_idx = {p: i for i, p in enumerate(self.pos_vocab)}
        self._rel_idx = {r: i for i, r in enumerate(self.deprel_vocab)}

    @classmethod
    def from_training(cls, clean_train: Dataset, hyp_train: Dataset,
                      fused: EmbeddingTable, window=2):
        unigrams, bigrams = collect_ngrams(clean_train)
        pos, rel = set(), set()
        for utt in hyp_train:
            for tok in utt.tokens:
                pos.add(tok.pos or "<none>")
                rel.add(tok.deprel or "<none>")
        pos_vocab = sorted(pos | {"root", "<none>", "<unk>"})
        rel_vocab = sorted(rel | {"<none>", "<unk>"})
        return cls(fused, pos_vocab, rel_vocab, unigrams, bigrams, window)

    def stream_dims(self):
        d = self.fused.dim
        return {
            "window": (2 * self.window + 1) * d,
            "length": 1,
            "lm": 3,
            "pos": len(self.pos_vocab),
            "deprel": len(self.deprel_vocab),
            "govpos": len(self.pos_vocab),
        }

    def _pos_onehot(self, tag):
        v = np.zeros(len(self.pos_vocab))
        v[self._pos_idx.get(tag, self._pos_idx["<unk>"])] = 1.0
        return v

    def _rel_onehot(self, tag):
        v = np.zeros(len(self.deprel_vocab))
        v[self._rel_idx.get(tag, self._rel_idx["<unk>"])] = 1.0
        return v

    def streams(self, utt: Utterance):
        n = len(utt.tokens)
        d = self.fused.dim
        vecs = [self.fused.lookup(t.surface.lower()) for t in utt.tokens]
        pad = np.zeros(d)
        out = {name: np.zeros((n, dim)) for name, dim in self.stream_dims().items()}
        for i, tok in enumerate(utt.tokens):
            window = []
            for off in range(-self.window, self.window + 1):
                j = i + off
                window.append(vecs[j] if 0 <= j < n else pad)
            out["window"][i] = np.concatenate(window)
            out["length"][i, 0] = len(tok.surface) / 10.0
            prev = utt.tokens[i - 1].surface if i > 0 else BOS
            out["lm"][i, lm_category(prev, tok.surface, self.unigrams, self.bigrams)] = 1.0
            out["pos"][i] = self._pos_onehot(tok.pos or "<none>")
            out["deprel"][i] = self._rel_onehot(tok.deprel or "<none>")
            gov = tok.governor
            out["govpos"][i] = self._pos_onehot(
                "root" if gov is None else (utt.tokens[gov].pos or "<none>"))
        return out


STREAM_ORDER = ("window", "length", "lm", "pos", "deprel", "govpos")


class MsMlpModel:
    """Per-stream projections, a merge layer, one hidden layer and two
    output units scoring Correct and Error."""

    def __init__(self, vectorizer: MsMlpVectorizer, params, config: MsMlpConfig):
        self.vectorizer = vectorizer
        self.params = params
        self.config = config

    def forward(self, streams, want_cache=False):
        p = self.params
        projs = {}
        for name in STREAM_ORDER:
            projs[name] = np.tanh(streams[name] @ p[f"w_{name}"].T + p[f"b_{name}"])
        m_in = np.concatenate([projs[name] for name in STREAM_ORDER], axis=1)
        m = np.tanh(m_in @ p["w_merge"].T + p["b_merge"])
        h = np.tanh(m @ p["w_hidden"].T + p["b_hidden"])
        z = h @ p["w_out"].T + p["b_out"]
        if want_cache:
            return z, (projs, m_in, m, h)
        return z

    def confidences(self, utt: Utterance):
        """Softmax value of the Correct output per token, strictly in (0,1)."""
        z = self.forward(self.vectorizer.streams(utt))
        diff = z[:, 0] - z[:, 1]
        p = 1.0 / (1.0 + np.exp(-np.clip(diff, -700, 700)))
        return np.clip(p, 1e-15, 1.0 - 1e-15)

    def save(self, path):
        v = self.vectorizer
        header = {
            "stream_order": list(STREAM_ORDER),
            "stream_dims": {k: int(d) for k, d in v.stream_dims().items()},
            "widths": {"proj": self.config.proj, "merge": self.config.merge,
                       "hidden": self.config.hidden, "out": 2},
            "window": v.window,
            "pos_vocab": v.pos_vocab,
            "deprel_vocab": v.deprel_vocab,
            "unigrams": sorted(v.unigrams),
            "bigrams": [list(b) for b in sorted(v.bigrams)],
            "fused_words": v.fused.words,
            "config": {"epochs": self.config.epochs, "lr": self.config.lr,
                       "batch": self.config.batch, "seed": self.config.seed},
        }
        arrays = dict(self.params)
        arrays["fused_matrix"] = v.fused.matrix
        modelio.save_blob(path, "msmlp", header, arrays)

    @classmethod
    def load(cls, path):
        header, arrays = modelio.load_blob(path, "msmlp")
        fused = EmbeddingTable(header["fused_words"], arrays.pop("fused_matrix"),
                               name="fused")
        vec = MsMlpVectorizer(
            fused, header["pos_vocab"], header["deprel_vocab"],
            frozenset(header["unigrams"]),
            frozenset(tuple(b) for b in header["bigrams"]),
            window=header["window"],
        )
        cfg = MsMlpConfig(proj=header["widths"]["proj"],
                          merge=header["widths"]["merge"],
                          hidden=header["widths"]["hidden"],
                          window=header["window"], **header["config"])
        return cls(vec, arrays, cfg)


def _init_mlp_params(vectorizer: MsMlpVectorizer, cfg: MsMlpConfig):
    rng = rng_for("msmlp", cfg.seed)

    def glorot(rows, cols):
        lim = np.sqrt(6.0 / (rows + cols))
        return rng.uniform(-lim, lim, size=(rows, cols))

    params = {}
    for name, dim in vectorizer.stream_dims().items():
        params[f"w_{name}"] = glorot(cfg.proj, dim)
        params[f"b_{name}"] = np.zeros(cfg.proj)
    merged = cfg.proj * len(STREAM_ORDER)
    params["w_merge"] = glorot(cfg.merge, merged)
    params["b_merge"] = np.zeros(cfg.merge)
    params["w_hidden"] = glorot(cfg.hidden, cfg.merge)
    params["b_hidden"] = np.zeros(cfg.hidden)
    params["w_out"] = glorot(2, cfg.hidden)
    params["b_out"] = np.zeros(2)
    return params


def mlp_loss_and_grads(model: MsMlpModel, streams, y):
    """Mean 2-class cross entropy over a batch, with gradients."""
    p = model.params
    z, (projs, m_in, m, h) = model.forward(streams, want_cache=True)
    probs = softmax(z, axis=1)
    n = len(y)
    loss = float(-np.mean(np.log(np.clip(probs[np.arange(n), y], 1e-300, None))))
    dz = probs.copy()
    dz[np.arange(n), y] -= 1.0
    dz /= n
    grads = {"w_out": dz.T @ h, "b_out": dz.sum(axis=0)}
    dh = dz @ p["w_out"]
    dh_pre = dh * (1.0 - h ** 2)
    grads["w_hidden"] = dh_pre.T @ m
    grads["b_hidden"] = dh_pre.sum(axis=0)
    dm = dh_pre @ p["w_hidden"]
    dm_pre = dm * (1.0 - m ** 2)
    grads["w_merge"] = dm_pre.T @ m_in
    grads["b_merge"] = dm_pre.sum(axis=0)
    dm_in = dm_pre @ p["w_merge"]
    offset = 0
    proj = next(iter(projs.values())).shape[1]
    for name in STREAM_ORDER:
        dp = dm_in[:, offset:offset + proj]
        offset += proj
        dp_pre = dp * (1.0 - projs[name] ** 2)
        grads[f"w_{name}"] = dp_pre.T @ streams[name]
        grads[f"b_{name}"] = dp_pre.sum(axis=0)
    return loss, grads


def _training_matrix(dataset: Dataset, vectorizer: MsMlpVectorizer):
    per_stream = {name: [] for name in STREAM_ORDER}
    labels = []
    for utt in dataset:
        streams = vectorizer.streams(utt)
        for name in STREAM_ORDER:
            per_stream[name].append(streams[name])
        for i, tok in enumerate(utt.tokens):
            if tok.error_flag is None:
                raise ConfidenceError(
                    f"token {i} of {utt.id!r} lacks an error flag")
            labels.append(0 if tok.error_flag == "correct" else 1)
    x = {name: np.concatenate(chunks) for name, chunks in per_stream.items()}
    return x, np.array(labels, dtype=np.int64)


def train_msmlp(dataset: Dataset, vectorizer: MsMlpVectorizer,
                cfg: MsMlpConfig = MsMlpConfig()) -> MsMlpModel:
    """Mini-batch gradient descent on 2-class cross entropy."""
    if len(dataset) == 0:
        raise ConfidenceError("cannot train on an empty dataset")
    model = MsMlpModel(vectorizer, _init_mlp_params(vectorizer, cfg), cfg)
    x, y = _training_matrix(dataset, vectorizer)
    rng = rng_for("msmlp-shuffle", cfg.seed)
    for _ in range(cfg.epochs):
        order = rng.permutation(len(y))
        for s in range(0, len(y), cfg.batch):
            idx = order[s:s + cfg.batch]
            xb = {name: x[name][idx] for name in STREAM_ORDER}
            _, grads = mlp_loss_and_grads(model, xb, y[idx])
            for name, g in grads.items():
                model.params[name] -= cfg.lr * g
    return model


def attach_confidence(dataset: Dataset, model: MsMlpModel) -> Dataset:
    """Fill every token's mlp_conf column (rounded for stable files)."""
    utts = []
    for utt in dataset:
        conf = model.confidences(utt)
        toks = tuple(replace(t, mlp_conf=round(float(c), 6))
                     for t, c in zip(utt.tokens, conf))
        utts.append(replace(utt, tokens=toks))
    return Dataset(tuple(utts))
