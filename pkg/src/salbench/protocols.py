"""Dataset plumbing: manifests, duplicate detection, objectness scoring
and the three benchmark splits (standard, objectness, few-shot).

File formats
------------
* manifest: JSON lines, one entry per line with keys
  ``id, image_path, gt_path, source_dataset, objectness`` (last optional)
* scores file: CSV, either the two-column form ``id,score`` or the wide
  form ``id`` + 1001 probability columns; the wide form must declare the
  background class in a leading comment line ``# background_index=N``
* review file: CSV with header ``id_a,id_b,votes``
* split: JSON object with ``name``, ``seed``, ``partitions``
* vectors file: ``.npz`` holding an ``ids`` string array and a matching
  ``vectors`` matrix
"""

import csv
import json
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from PIL import Image
from sklearn.base import BaseEstimator, TransformerMixin

# nearest-neighbour retrieval defaults
DEFAULT_NEIGHBORS = 5
DEFAULT_SIMILARITY = 0.97
# split protocol constants
STANDARD_TRAIN_SIZE = 10000
OBJECTNESS_SUBSET_SIZE = 10000
FEWSHOT_SCALES = (10, 30, 50, 100, 300, 500, 1000, 3000, 5000, 10000)
# objectness scoring
VISIBILITY_THRESHOLD = 0.01
NUM_CLASS_PROBS = 1001


# ---------------------------------------------------------------------------
# manifest

@dataclass(frozen=True)
class ManifestEntry:
    id: str
    image_path: str
    gt_path: str
    source_dataset: str = ""
    objectness: Optional[float] = None


@dataclass
class DatasetManifest:
    entries: tuple = ()

    def __post_init__(self):
        self.entries = tuple(self.entries)
        seen = set()
        for e in self.entries:
            if not e.id:
                raise ValueError("manifest entry with empty id")
            if e.id in seen:
                raise ValueError("duplicate manifest id %r" % e.id)
            seen.add(e.id)
            if not e.image_path or not e.gt_path:
                raise ValueError("manifest entry %r has an empty path" % e.id)
            if e.objectness is not None and not e.objectness >= 0.0:
                raise ValueError(
                    "objectness of %r must be >= 0, got %r"
                    % (e.id, e.objectness))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def ids(self):
        return [e.id for e in self.entries]

    def by_id(self, id_):
        for e in self.entries:
            if e.id == id_:
                return e
        raise KeyError(id_)

    def without(self, ids):
        """Snapshot copy with the given ids dropped."""
        ids = set(ids)
        return DatasetManifest(
            tuple(e for e in self.entries if e.id not in ids))

    def with_objectness(self, scores):
        """Snapshot copy with objectness filled in from an id->score map."""
        out = []
        for e in self.entries:
            if e.id in scores:
                e = ManifestEntry(e.id, e.image_path, e.gt_path,
                                  e.source_dataset, float(scores[e.id]))
            out.append(e)
        return DatasetManifest(tuple(out))


def load_manifest(path):
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(
                    "%s line %d: invalid JSON (%s)" % (path, lineno, exc))
            entries.append(ManifestEntry(
                id=rec["id"],
                image_path=rec["image_path"],
                gt_path=rec["gt_path"],
                source_dataset=rec.get("source_dataset", ""),
                objectness=rec.get("objectness"),
            ))
    return DatasetManifest(tuple(entries))


def save_manifest(manifest, path):
    with open(path, "w", encoding="utf-8") as fh:
        for e in manifest:
            rec = {"id": e.id, "image_path": e.image_path,
                   "gt_path": e.gt_path, "source_dataset": e.source_dataset}
            if e.objectness is not None:
                rec["objectness"] = e.objectness
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# duplicate detection

@dataclass(frozen=True)
class DuplicatePair:
    id_a: str
    id_b: str
    similarity: float
    verdict: str = "auto"  # auto | confirmed-same | rejected

    def __post_init__(self):
        if not self.id_a < self.id_b:
            raise ValueError(
                "pair ids must be ordered, got (%r, %r)"
                % (self.id_a, self.id_b))
        if self.verdict not in ("auto", "confirmed-same", "rejected"):
            raise ValueError("unknown verdict %r" % self.verdict)


class DownscaleEmbedder(BaseEstimator, TransformerMixin):
    """Deliberately simple retrieval descriptor: grayscale downscale to
    patch_size x patch_size, mean-subtract, L2-normalise.

    Stateless (fit is a no-op); transform accepts file paths, PIL images
    or arrays and returns an (n, patch_size^2) matrix.  Anything fancier
    (a pretrained network, say) plugs in behind the same transform
    contract or via a precomputed vectors file.
    """

    def __init__(self, patch_size=32):
        self.patch_size = patch_size

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        return np.stack([self.embed_one(x) for x in X])

    def embed_one(self, image):
        ps = self.patch_size
        if isinstance(image, np.ndarray):
            arr = np.clip(image, 0.0, 1.0)
            im = Image.fromarray(np.rint(arr * 255.0).astype(np.uint8),
                                 mode="L")
        elif isinstance(image, Image.Image):
            im = image.convert("L")
        else:
            try:
                with Image.open(image) as fh:
                    im = fh.convert("L")
            except (OSError, ValueError) as exc:
                raise ValueError("undecodable image %s (%s)" % (image, exc))
        im = im.resize((ps, ps), Image.BILINEAR)
        v = np.asarray(im, dtype=np.float64).ravel() / 255.0
        v = v - v.mean()
        norm = np.linalg.norm(v)
        if norm > 0.0:
            v = v / norm
        return v


def embed_image(image, embedder=None):
    """Descriptor of one image; see DownscaleEmbedder for the default."""
    if embedder is None:
        embedder = DownscaleEmbedder()
    return embedder.embed_one(image)


def save_vectors(ids, vectors, path):
    np.savez(path, ids=np.asarray(list(ids)), vectors=np.asarray(vectors))


def load_vectors(path):
    data = np.load(path)
    return {str(i): v for i, v in zip(data["ids"], data["vectors"])}


def find_duplicates(manifest, k=DEFAULT_NEIGHBORS, tau=DEFAULT_SIMILARITY,
                    embedder=None, vectors=None):
    """Candidate duplicate pairs by k-nearest-neighbour cosine retrieval.

    Each image's k nearest neighbours by cosine similarity are examined
    and every pair at similarity >= tau is emitted once with ordered ids
    and verdict "auto".  Ties in similarity are broken by id so results
    do not depend on manifest order.  `vectors` may supply precomputed
    descriptors (id -> vector); remaining images go through `embedder`
    (default DownscaleEmbedder).
    """
    if len(manifest) < 2:
        raise ValueError(
            "need at least 2 manifest entries, got %d" % len(manifest))
    if k < 1:
        raise ValueError("k must be >= 1, got %r" % k)
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must lie in (0, 1], got %r" % tau)

    ids = manifest.ids()
    if embedder is None:
        embedder = DownscaleEmbedder()
    vecs = []
    for e in manifest:
        if vectors is not None and e.id in vectors:
            v = np.asarray(vectors[e.id], dtype=np.float64)
            norm = np.linalg.norm(v)
            vecs.append(v / norm if norm > 0.0 else v)
        else:
            vecs.append(embedder.embed_one(e.image_path))
    mat = np.stack(vecs)

    # rank of each id in sorted order, used as the tie key
    id_rank = np.argsort(np.argsort(np.asarray(ids)))
    found = {}
    chunk = max(1, 4_000_000 // max(1, len(ids)))
    for start in range(0, len(ids), chunk):
        sims = mat[start:start + chunk] @ mat.T
        for row, i in enumerate(range(start, min(start + chunk, len(ids)))):
            s = sims[row]
            # most similar first, equal similarities in id order
            order = np.lexsort((id_rank, -s))
            taken = 0
            for j in order:
                if j == i:
                    continue
                if taken >= k:
                    break
                taken += 1
                if s[j] >= tau:
                    key = (ids[i], ids[j]) if ids[i] < ids[j] \
                        else (ids[j], ids[i])
                    sim = min(float(s[j]), 1.0)
                    if key not in found or sim > found[key]:
                        found[key] = sim
    return [DuplicatePair(a, b, found[(a, b)], "auto")
            for a, b in sorted(found)]


class ReviewResult(NamedTuple):
    manifest: DatasetManifest
    pairs: list
    removed_ids: list


def load_review(path):
    """Rows of the review CSV as (id_a, id_b, votes) tuples."""
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for rec in csv.DictReader(fh):
            try:
                rows.append((rec["id_a"], rec["id_b"], int(rec["votes"])))
            except (KeyError, TypeError, ValueError):
                raise ValueError(
                    "review file %s needs columns id_a,id_b,votes" % path)
    return rows


def apply_review(manifest, pairs, review):
    """Prune the manifest according to human duplicate votes.

    `review` is a list of (id_a, id_b, votes) rows (0..3 votes per pair)
    or a path to the CSV.  A pair with >= 2 "same" votes is confirmed
    and the lexicographically larger id of the pair is removed; pairs
    are processed greedily in sorted order and every confirmed pair
    removes its larger id, so a chain a-b, b-c drops b and c.  Votes
    naming a pair that was never proposed are an error.
    """
    if isinstance(review, (str, bytes)):
        review = load_review(review)
    by_key = {(p.id_a, p.id_b): p for p in pairs}
    votes = {}
    for id_a, id_b, n in review:
        key = (id_a, id_b) if id_a < id_b else (id_b, id_a)
        if key not in by_key:
            raise ValueError(
                "review votes reference unknown pair (%s, %s)" % key)
        if not 0 <= n <= 3:
            raise ValueError(
                "votes for pair (%s, %s) must lie in 0..3, got %d"
                % (key[0], key[1], n))
        votes[key] = n
    removed = set()
    out_pairs = []
    for p in sorted(pairs, key=lambda p: (p.id_a, p.id_b)):
        n = votes.get((p.id_a, p.id_b))
        if n is None:
            out_pairs.append(p)
        elif n >= 2:
            removed.add(p.id_b)  # keep the lexicographically smaller id
            out_pairs.append(DuplicatePair(
                p.id_a, p.id_b, p.similarity, "confirmed-same"))
        else:
            out_pairs.append(DuplicatePair(
                p.id_a, p.id_b, p.similarity, "rejected"))
    return ReviewResult(manifest.without(removed), out_pairs,
                        sorted(removed))


# ---------------------------------------------------------------------------
# objectness

def objectness_score(probs, background_index, expected_length=NUM_CLASS_PROBS):
    """Sum of class probabilities strictly above the visibility cut,
    skipping the background class."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1 or probs.size != expected_length:
        raise ValueError(
            "expected a probability vector of length %d, got shape %s"
            % (expected_length, probs.shape))
    if probs.min() < 0.0 or probs.max() > 1.0:
        raise ValueError("class probabilities must lie in [0, 1]")
    if not 0 <= background_index < expected_length:
        raise ValueError(
            "background index %r outside 0..%d"
            % (background_index, expected_length - 1))
    visible = probs > VISIBILITY_THRESHOLD
    visible[background_index] = False
    return float(probs[visible].sum())


def read_scores_file(path, expected_length=NUM_CLASS_PROBS):
    """id -> objectness score from a scores CSV.

    Two forms are accepted: ``id,score`` rows with precomputed scores,
    or ``id`` followed by `expected_length` probability columns.  The
    wide form must declare the background class up front in a comment
    line ``# background_index=N``.
    """
    background_index = None
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                text = line.lstrip("#").strip()
                if text.startswith("background_index"):
                    background_index = int(text.split("=", 1)[1])
                continue
            rows.append(next(csv.reader([line])))
    if not rows:
        raise ValueError("scores file %s is empty" % path)
    header, body = rows[0], rows[1:]
    scores = {}
    if len(header) == 2:
        for rec in body:
            if len(rec) != 2:
                raise ValueError(
                    "two-column scores file %s has a row of width %d"
                    % (path, len(rec)))
            scores[rec[0]] = float(rec[1])
    elif len(header) == expected_length + 1:
        if background_index is None:
            raise ValueError(
                "scores file %s with probability columns must declare "
                "'# background_index=N' in its header" % path)
        for rec in body:
            if len(rec) != expected_length + 1:
                raise ValueError(
                    "scores row for %r has %d probability columns, "
                    "expected %d" % (rec[0], len(rec) - 1, expected_length))
            probs = np.asarray(rec[1:], dtype=np.float64)
            scores[rec[0]] = objectness_score(probs, background_index,
                                              expected_length)
    else:
        raise ValueError(
            "scores file %s must have 2 or %d columns, got %d"
            % (path, expected_length + 1, len(header)))
    return scores


# ---------------------------------------------------------------------------
# splits

@dataclass
class SplitSpec:
    name: str
    seed: int
    partitions: dict = field(default_factory=dict)

    def validate(self, manifest=None):
        ids = [i for part in self.partitions.values() for i in part]
        if len(ids) != len(set(ids)):
            raise ValueError(
                "split %r has overlapping partitions" % self.name)
        if manifest is not None:
            extra = set(ids) - set(manifest.ids())
            if extra:
                raise ValueError(
                    "split %r references unknown ids, e.g. %r"
                    % (self.name, sorted(extra)[0]))
        return self

    def to_json(self):
        return json.dumps(
            {"name": self.name, "seed": self.seed,
             "partitions": {k: list(v) for k, v in self.partitions.items()}},
            indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        rec = json.loads(text)
        return cls(name=rec["name"], seed=int(rec["seed"]),
                   partitions={k: list(v)
                               for k, v in rec["partitions"].items()})


def save_split(spec, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(spec.to_json() + "\n")


def load_split(path):
    with open(path, "r", encoding="utf-8") as fh:
        return SplitSpec.from_json(fh.read())


def split_standard(manifest, seed, train_size=STANDARD_TRAIN_SIZE):
    """Seeded uniform train/test split; train gets `train_size` ids."""
    ids = sorted(manifest.ids())
    if len(ids) < train_size:
        raise ValueError(
            "manifest has %d entries, need at least %d"
            % (len(ids), train_size))
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(ids))
    train = {ids[i] for i in perm[:train_size]}
    return SplitSpec(
        name="standard", seed=int(seed),
        partitions={"train": sorted(train),
                    "test": sorted(set(ids) - train)}).validate(manifest)


def split_objectness(manifest, subset_size=OBJECTNESS_SUBSET_SIZE):
    """Easy/normal/hard split by descending objectness score.

    Requires a score on every entry (the first entry without one is
    named in the error).  Ties are broken by id so the assignment is a
    total order.
    """
    for e in manifest:
        if e.objectness is None:
            raise ValueError("missing objectness score for id %r" % e.id)
    if len(manifest) < 2 * subset_size:
        raise ValueError(
            "manifest has %d entries, need at least %d for two %d-sized "
            "subsets" % (len(manifest), 2 * subset_size, subset_size))
    ranked = sorted(manifest, key=lambda e: (-e.objectness, e.id))
    ids = [e.id for e in ranked]
    return SplitSpec(
        name="objectness", seed=0,
        partitions={"easy": sorted(ids[:subset_size]),
                    "normal": sorted(ids[subset_size:-subset_size]),
                    "hard": sorted(ids[-subset_size:])}).validate(manifest)


def split_fewshot(train_ids, seed, scales=FEWSHOT_SCALES):
    """Nested subsets of the train ids, one SplitSpec per scale.

    All scales are prefixes of a single seeded shuffle, so each smaller
    subset is contained in every larger one and differences between
    scales isolate the sample-size effect.
    """
    ids = sorted(train_ids)
    scales = tuple(sorted(int(s) for s in scales))
    if len(ids) < scales[-1]:
        raise ValueError(
            "got %d train ids, need at least %d" % (len(ids), scales[-1]))
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(ids))
    shuffled = [ids[i] for i in perm]
    return [SplitSpec(name="fewshot-%d" % s, seed=int(seed),
                      partitions={"train": sorted(shuffled[:s])}).validate()
            for s in scales]
