"""Append-only store of community artifacts with a typed dependency graph.

The store models a competition community frozen at a deadline: kernels
(shared code), datasets, and discussion threads, plus who-built-on-what
edges. Snapshots are immutable; publishing returns a new snapshot and the
chain can be persisted as an event log and replayed bit-exactly.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

from .errors import CommunityError, GraphError

KERNEL = "kernel"
DATASET = "dataset"
DISCUSSION = "discussion"
KINDS = (KERNEL, DATASET, DISCUSSION)

AUTHOR_TIERS = ("none", "novice", "contributor", "expert", "master", "grandmaster")

HIGHER = "higher"
LOWER = "lower"

SAMPLING_POLICIES = ("top_score", "top_votes", "recent", "weighted_random")


@dataclass(frozen=True, slots=True, order=True)
class ArtifactId:
    kind: str
    key: str

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise CommunityError(f"unknown artifact kind {self.kind!r} for key {self.key!r}")
        if not self.key:
            raise CommunityError("artifact key must be non-empty")

    def __str__(self) -> str:
        return f"{self.kind}:{self.key}"

    @classmethod
    def parse(cls, text: str) -> "ArtifactId":
        kind, sep, key = text.partition(":")
        if not sep:
            raise CommunityError(f"artifact id {text!r} is not of the form kind:key")
        return cls(kind, key)


@dataclass(frozen=True, slots=True)
class Kernel:
    key: str
    author_tier: str
    votes: int
    published_at: float
    body: str
    public_score: float | None = None
    produced_files: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        _check_common(self.key, self.author_tier, self.votes, self.published_at)
        if self.public_score is not None and not math.isfinite(self.public_score):
            raise CommunityError(f"kernel {self.key!r} has a non-finite public_score")

    @property
    def id(self) -> ArtifactId:
        return ArtifactId(KERNEL, self.key)


@dataclass(frozen=True, slots=True)
class Dataset:
    key: str
    published_at: float
    # (relative path, size in bytes, sha256 hex digest) per stored file
    manifest: tuple[tuple[str, int, str], ...] = ()

    def __post_init__(self) -> None:
        _check_common(self.key, "none", 0, self.published_at)

    @property
    def id(self) -> ArtifactId:
        return ArtifactId(DATASET, self.key)


@dataclass(frozen=True, slots=True)
class Discussion:
    key: str
    votes: int
    published_at: float
    body: str
    comments: tuple[tuple[str, str], ...] = ()  # (author_tier, text)

    def __post_init__(self) -> None:
        _check_common(self.key, "none", self.votes, self.published_at)

    @property
    def id(self) -> ArtifactId:
        return ArtifactId(DISCUSSION, self.key)


Artifact = Kernel | Dataset | Discussion


def _check_common(key: str, tier: str, votes: int, published_at: float) -> None:
    if not key:
        raise CommunityError("artifact key must be non-empty")
    if tier not in AUTHOR_TIERS:
        raise CommunityError(f"artifact {key!r} has unknown author tier {tier!r}")
    if votes < 0:
        raise CommunityError(f"artifact {key!r} has negative votes")
    if published_at is None or not math.isfinite(published_at):
        raise CommunityError(f"artifact {key!r} is missing a finite published_at timestamp")


@dataclass(frozen=True, slots=True)
class DependencyGraph:
    """Edges run consumer -> dependency; both endpoints must be vertices."""

    vertices: frozenset[ArtifactId]
    edges: frozenset[tuple[ArtifactId, ArtifactId]]

    def validate(self, published_at: Mapping[ArtifactId, float]) -> None:
        for consumer, dependency in self.edges:
            if consumer not in self.vertices or dependency not in self.vertices:
                raise GraphError(f"edge {consumer} -> {dependency} has an endpoint outside the graph")
            if published_at[consumer] < published_at[dependency]:
                raise GraphError(
                    f"edge {consumer} -> {dependency} points at an artifact published later than its consumer"
                )
        _assert_acyclic(self.vertices, self.edges)

    def dependencies_of(self, vertex: ArtifactId) -> frozenset[ArtifactId]:
        return frozenset(d for c, d in self.edges if c == vertex)


def _assert_acyclic(vertices: frozenset[ArtifactId], edges: frozenset[tuple[ArtifactId, ArtifactId]]) -> None:
    out: dict[ArtifactId, list[ArtifactId]] = {v: [] for v in vertices}
    indegree: dict[ArtifactId, int] = {v: 0 for v in vertices}
    for consumer, dependency in edges:
        out[consumer].append(dependency)
        indegree[dependency] += 1
    ready = [v for v, n in sorted(indegree.items()) if n == 0]
    seen = 0
    while ready:
        vertex = ready.pop()
        seen += 1
        for nxt in out[vertex]:
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                ready.append(nxt)
    if seen != len(vertices):
        cyclic = sorted(str(v) for v, n in indegree.items() if n > 0)
        raise GraphError(f"dependency graph contains a cycle through {', '.join(cyclic)}")


@dataclass(frozen=True, slots=True)
class CommunitySnapshot:
    """Immutable community state at one iteration of the loop."""

    iteration: int
    kernels: tuple[Kernel, ...]
    datasets: tuple[Dataset, ...]
    discussions: tuple[Discussion, ...]
    graph: DependencyGraph
    score_direction: str = HIGHER

    def artifacts(self) -> tuple[Artifact, ...]:
        return (*self.kernels, *self.datasets, *self.discussions)

    def ids(self) -> frozenset[ArtifactId]:
        return frozenset(a.id for a in self.artifacts())

    def get(self, artifact_id: ArtifactId) -> Artifact:
        for artifact in self.artifacts():
            if artifact.id == artifact_id:
                return artifact
        raise CommunityError(f"artifact {artifact_id} is not in the snapshot")


@dataclass(frozen=True, slots=True)
class CommunityCorpus:
    """Raw pre-deadline artifact collection as scraped/bundled, before filtering."""

    kernels: tuple[Kernel, ...] = ()
    datasets: tuple[Dataset, ...] = ()
    discussions: tuple[Discussion, ...] = ()
    deps: tuple[tuple[ArtifactId, ArtifactId], ...] = ()  # consumer -> dependency


@dataclass(frozen=True, slots=True)
class Sample:
    kernels: tuple[Kernel, ...]
    discussions: tuple[Discussion, ...]


def _kernel_rank_key(kernel: Kernel, direction: str):
    # Scored kernels sort ahead of unscored ones; ties break by votes then key.
    if kernel.public_score is None:
        return (1, 0.0, -kernel.votes, kernel.key)
    oriented = -kernel.public_score if direction == HIGHER else kernel.public_score
    return (0, oriented, -kernel.votes, kernel.key)


def init_community(
    corpus: CommunityCorpus,
    deadline: float,
    k_kernel: int = 10,
    k_discussion: int = 10,
    dataset_access: bool = True,
    direction: str = HIGHER,
) -> CommunitySnapshot:
    """Build the iteration-0 snapshot from a raw corpus frozen at `deadline`."""
    if direction not in (HIGHER, LOWER):
        raise CommunityError(f"unknown score direction {direction!r}")
    if k_kernel < 0 or k_discussion < 0:
        raise CommunityError("k_kernel and k_discussion must be non-negative")

    known = {a.id for a in (*corpus.kernels, *corpus.datasets, *corpus.discussions)}
    if len(known) != len(corpus.kernels) + len(corpus.datasets) + len(corpus.discussions):
        raise CommunityError("corpus contains duplicate artifact ids")
    for consumer, dependency in corpus.deps:
        if consumer not in known:
            raise GraphError(f"corpus edge names unknown consumer {consumer}")
        if dependency not in known:
            raise GraphError(f"corpus edge names unknown dependency {dependency}")

    kernels = [k for k in corpus.kernels if k.published_at < deadline]
    discussions = [d for d in corpus.discussions if d.published_at < deadline]
    datasets = [d for d in corpus.datasets if d.published_at < deadline]

    kernels.sort(key=lambda k: _kernel_rank_key(k, direction))
    kernels = kernels[:k_kernel]
    discussions.sort(key=lambda d: (-d.votes, d.key))
    discussions = discussions[:k_discussion]
    if not dataset_access:
        datasets = []
    datasets.sort(key=lambda d: d.key)

    retained = frozenset(a.id for a in (*kernels, *datasets, *discussions))
    edges = frozenset(
        (consumer, dependency)
        for consumer, dependency in corpus.deps
        if consumer in retained and dependency in retained
    )
    graph = DependencyGraph(vertices=retained, edges=edges)
    snapshot = CommunitySnapshot(
        iteration=0,
        kernels=tuple(kernels),
        datasets=tuple(datasets),
        discussions=tuple(discussions),
        graph=graph,
        score_direction=direction,
    )
    graph.validate(_published_index(snapshot))
    return snapshot


def _published_index(snapshot: CommunitySnapshot) -> dict[ArtifactId, float]:
    return {a.id: a.published_at for a in snapshot.artifacts()}


def publish(
    snapshot: CommunitySnapshot,
    artifact: Artifact,
    deps: Iterable[ArtifactId] = (),
    score: float | None = None,
) -> CommunitySnapshot:
    """Append one artifact (plus its dependency edges) and advance the iteration."""
    deps = tuple(deps)
    existing = snapshot.ids()
    if artifact.id in existing:
        raise CommunityError(f"duplicate artifact id {artifact.id} rejected")
    published_at = _published_index(snapshot)
    for dep in deps:
        if dep not in existing:
            raise CommunityError(f"unknown dependency {dep} rejected")
        if artifact.published_at < published_at[dep]:
            raise GraphError(
                f"artifact {artifact.id} would predate its dependency {dep}"
            )
    if score is not None and isinstance(artifact, Kernel):
        artifact = replace(artifact, public_score=float(score))

    kernels, datasets, discussions = snapshot.kernels, snapshot.datasets, snapshot.discussions
    if isinstance(artifact, Kernel):
        kernels = (*kernels, artifact)
    elif isinstance(artifact, Dataset):
        datasets = (*datasets, artifact)
    else:
        discussions = (*discussions, artifact)

    graph = DependencyGraph(
        vertices=snapshot.graph.vertices | {artifact.id},
        edges=snapshot.graph.edges | {(artifact.id, dep) for dep in deps},
    )
    return CommunitySnapshot(
        iteration=snapshot.iteration + 1,
        kernels=kernels,
        datasets=datasets,
        discussions=discussions,
        graph=graph,
        score_direction=snapshot.score_direction,
    )


def dependency_closure(snapshot: CommunitySnapshot, artifact_id: ArtifactId) -> frozenset[ArtifactId]:
    """Transitive dependencies of `artifact_id`, including itself."""
    if artifact_id not in snapshot.graph.vertices:
        raise CommunityError(f"artifact {artifact_id} is not in the snapshot")
    out: dict[ArtifactId, list[ArtifactId]] = {}
    for consumer, dependency in snapshot.graph.edges:
        out.setdefault(consumer, []).append(dependency)
    closure: set[ArtifactId] = set()
    frontier = [artifact_id]
    while frontier:
        vertex = frontier.pop()
        if vertex in closure:
            continue
        closure.add(vertex)
        frontier.extend(out.get(vertex, ()))
    return frozenset(closure)


def sample_artifacts(
    snapshot: CommunitySnapshot,
    policy: str,
    n_kernels: int,
    n_discussions: int,
    seed: int | None = None,
) -> Sample:
    """Deterministically pick kernels and discussions for the next iteration."""
    if policy not in SAMPLING_POLICIES:
        raise CommunityError(f"unknown sampling policy {policy!r}")
    if policy == "weighted_random" and seed is None:
        raise CommunityError("weighted_random sampling requires a seed")

    def pick(items, n, votes_of, recency_of, score_key):
        items = list(items)
        if policy == "top_score":
            items.sort(key=score_key)
        elif policy == "top_votes":
            items.sort(key=lambda a: (-votes_of(a), a.key))
        elif policy == "recent":
            items.sort(key=lambda a: (-recency_of(a), a.key))
        else:
            return _weighted_sample(items, n, votes_of, seed)
        return tuple(items[:n])

    kernels = pick(
        snapshot.kernels,
        n_kernels,
        lambda k: k.votes,
        lambda k: k.published_at,
        lambda k: _kernel_rank_key(k, snapshot.score_direction),
    )
    discussions = pick(
        snapshot.discussions,
        n_discussions,
        lambda d: d.votes,
        lambda d: d.published_at,
        lambda d: (-d.votes, d.key),
    )
    return Sample(kernels=kernels, discussions=discussions)


def _weighted_sample(items, n, votes_of, seed):
    # Vote-proportional draw without replacement; +1 keeps zero-vote items drawable.
    items = sorted(items, key=lambda a: a.key)
    rng = random.Random(seed)
    chosen = []
    while items and len(chosen) < n:
        weights = [votes_of(a) + 1 for a in items]
        total = sum(weights)
        point = rng.random() * total
        acc = 0.0
        index = len(items) - 1
        for i, w in enumerate(weights):
            acc += w
            if point < acc:
                index = i
                break
        chosen.append(items.pop(index))
    return tuple(chosen)


# --- corpus and event-log serialization ---------------------------------------


def artifact_to_record(artifact: Artifact) -> dict:
    if isinstance(artifact, Kernel):
        return {
            "kind": KERNEL,
            "key": artifact.key,
            "tier": artifact.author_tier,
            "votes": artifact.votes,
            "published_at": artifact.published_at,
            "score": artifact.public_score,
            "body": artifact.body,
            "produced_files": list(artifact.produced_files),
        }
    if isinstance(artifact, Dataset):
        return {
            "kind": DATASET,
            "key": artifact.key,
            "published_at": artifact.published_at,
            "manifest": [list(entry) for entry in artifact.manifest],
        }
    return {
        "kind": DISCUSSION,
        "key": artifact.key,
        "votes": artifact.votes,
        "published_at": artifact.published_at,
        "body": artifact.body,
        "comments": [list(entry) for entry in artifact.comments],
    }


def record_to_artifact(record: Mapping) -> Artifact:
    kind = record.get("kind")
    key = record.get("key", "<unknown>")
    if "published_at" not in record or record["published_at"] is None:
        raise CommunityError(f"artifact {key!r} is missing a finite published_at timestamp")
    if kind == KERNEL:
        return Kernel(
            key=key,
            author_tier=record.get("tier", "none"),
            votes=int(record.get("votes", 0)),
            published_at=float(record["published_at"]),
            body=record.get("body", ""),
            public_score=None if record.get("score") is None else float(record["score"]),
            produced_files=tuple(record.get("produced_files", ())),
        )
    if kind == DATASET:
        return Dataset(
            key=key,
            published_at=float(record["published_at"]),
            manifest=tuple((p, int(s), d) for p, s, d in record.get("manifest", ())),
        )
    if kind == DISCUSSION:
        return Discussion(
            key=key,
            votes=int(record.get("votes", 0)),
            published_at=float(record["published_at"]),
            body=record.get("body", ""),
            comments=tuple((t, c) for t, c in record.get("comments", ())),
        )
    raise CommunityError(f"artifact {key!r} has unknown kind {kind!r}")


def load_corpus(corpus_dir: Path) -> CommunityCorpus:
    """Read a corpus directory: one metadata JSON per artifact plus payload files.

    Metadata may carry `payload` naming a sibling file (kernel/discussion body
    text, or a dataset file/directory that is hashed into the manifest) and
    `deps` listing `kind:key` ids this artifact builds on.
    """
    corpus_dir = Path(corpus_dir)
    kernels: list[Kernel] = []
    datasets: list[Dataset] = []
    discussions: list[Discussion] = []
    deps: list[tuple[ArtifactId, ArtifactId]] = []
    for meta_path in sorted(corpus_dir.glob("*.json")):
        try:
            record = json.loads(meta_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CommunityError(f"artifact metadata {meta_path.name} is not valid JSON: {exc}") from exc
        payload = record.get("payload")
        if payload is not None:
            payload_path = corpus_dir / payload
            if not payload_path.exists():
                raise CommunityError(f"artifact {record.get('key')!r} names missing payload {payload!r}")
            if record.get("kind") == DATASET:
                record = {**record, "manifest": [list(e) for e in hash_tree(payload_path)]}
            else:
                record = {**record, "body": payload_path.read_text(encoding="utf-8")}
        artifact = record_to_artifact(record)
        if isinstance(artifact, Kernel):
            kernels.append(artifact)
        elif isinstance(artifact, Dataset):
            datasets.append(artifact)
        else:
            discussions.append(artifact)
        for dep in record.get("deps", ()):
            deps.append((artifact.id, ArtifactId.parse(dep)))
    return CommunityCorpus(
        kernels=tuple(kernels),
        datasets=tuple(datasets),
        discussions=tuple(discussions),
        deps=tuple(deps),
    )


def hash_tree(path: Path) -> tuple[tuple[str, int, str], ...]:
    """Stable (relpath, size, sha256) manifest for a file or directory."""
    path = Path(path)
    files = [path] if path.is_file() else sorted(p for p in path.rglob("*") if p.is_file())
    entries = []
    for p in files:
        data = p.read_bytes()
        rel = p.name if path.is_file() else p.relative_to(path).as_posix()
        entries.append((rel, len(data), hashlib.sha256(data).hexdigest()))
    return tuple(entries)


class CommunityStore:
    """Snapshot chain with an optional append-only on-disk event log.

    Every mutation goes through `publish`, serialized by a lock; readers get
    immutable snapshots. With a log directory, each event is written as a
    numbered JSON file and `CommunityStore.replay` rebuilds the exact chain.
    """

    def __init__(self, snapshot: CommunitySnapshot, log_dir: Path | None = None):
        self._lock = threading.Lock()
        self._snapshots: list[CommunitySnapshot] = [snapshot]
        self.log_dir = Path(log_dir) if log_dir is not None else None
        if self.log_dir is not None and not (self.log_dir / "events").exists():
            (self.log_dir / "events").mkdir(parents=True, exist_ok=True)
            (self.log_dir / "snapshots").mkdir(parents=True, exist_ok=True)
            self._write_event(
                {
                    "event": "init",
                    "iteration": 0,
                    "direction": snapshot.score_direction,
                    "artifacts": [artifact_to_record(a) for a in snapshot.artifacts()],
                    "edges": sorted([str(c), str(d)] for c, d in snapshot.graph.edges),
                }
            )
            self._write_snapshot_index(snapshot)

    @classmethod
    def initialize(
        cls,
        corpus: CommunityCorpus,
        deadline: float,
        k_kernel: int = 10,
        k_discussion: int = 10,
        dataset_access: bool = True,
        direction: str = HIGHER,
        log_dir: Path | None = None,
    ) -> "CommunityStore":
        snapshot = init_community(corpus, deadline, k_kernel, k_discussion, dataset_access, direction)
        return cls(snapshot, log_dir=log_dir)

    @property
    def current(self) -> CommunitySnapshot:
        return self._snapshots[-1]

    @property
    def snapshots(self) -> tuple[CommunitySnapshot, ...]:
        return tuple(self._snapshots)

    def publish(self, artifact: Artifact, deps: Iterable[ArtifactId] = (), score: float | None = None) -> CommunitySnapshot:
        with self._lock:
            snapshot = publish(self.current, artifact, deps, score)
            self._snapshots.append(snapshot)
            if self.log_dir is not None:
                stored = snapshot.get(artifact.id)
                self._write_event(
                    {
                        "event": "publish",
                        "iteration": snapshot.iteration,
                        "artifact": artifact_to_record(stored),
                        "deps": sorted(str(d) for d in deps),
                        "score": score,
                    }
                )
                self._write_snapshot_index(snapshot)
            return snapshot

    def _write_event(self, event: dict) -> None:
        index = len(list((self.log_dir / "events").glob("*.json")))
        path = self.log_dir / "events" / f"{index:06d}.json"
        path.write_text(json.dumps(event, sort_keys=True, indent=1) + "\n", encoding="utf-8")

    def _write_snapshot_index(self, snapshot: CommunitySnapshot) -> None:
        path = self.log_dir / "snapshots" / f"{snapshot.iteration:06d}.json"
        path.write_text(
            json.dumps({"iteration": snapshot.iteration, "ids": sorted(str(i) for i in snapshot.ids())}, sort_keys=True)
            + "\n",
            encoding="utf-8",
        )

    @classmethod
    def replay(cls, log_dir: Path) -> "CommunityStore":
        """Rebuild the snapshot chain from an event log without re-running anything."""
        log_dir = Path(log_dir)
        events = sorted((log_dir / "events").glob("*.json"))
        if not events:
            raise CommunityError(f"no community event log under {log_dir}")
        init_event = json.loads(events[0].read_text(encoding="utf-8"))
        if init_event.get("event") != "init":
            raise CommunityError("community event log does not start with an init event")
        artifacts = [record_to_artifact(r) for r in init_event["artifacts"]]
        ids = frozenset(a.id for a in artifacts)
        edges = frozenset((ArtifactId.parse(c), ArtifactId.parse(d)) for c, d in init_event["edges"])
        snapshot = CommunitySnapshot(
            iteration=0,
            kernels=tuple(a for a in artifacts if isinstance(a, Kernel)),
            datasets=tuple(a for a in artifacts if isinstance(a, Dataset)),
            discussions=tuple(a for a in artifacts if isinstance(a, Discussion)),
            graph=DependencyGraph(vertices=ids, edges=edges),
            score_direction=init_event.get("direction", HIGHER),
        )
        store = cls(snapshot, log_dir=None)
        for event_path in events[1:]:
            event = json.loads(event_path.read_text(encoding="utf-8"))
            if event.get("event") != "publish":
                raise CommunityError(f"unknown community event in {event_path.name}")
            artifact = record_to_artifact(event["artifact"])
            deps = [ArtifactId.parse(d) for d in event.get("deps", ())]
            store.publish(artifact, deps=deps, score=None)
        store.log_dir = log_dir
        return store
