"""In-memory Git single source of truth: branches, revisions, webhooks."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional

from .sampling import Distribution, RandomSource
from .sim import EventKind, Simulator, to_ms, to_seconds


class GitError(Exception):
    pass


class AuthError(GitError):
    """Token mismatch between caller and repository (misconfigured PAT model)."""


def content_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def render_revision(counter: int) -> str:
    return f"{counter:08d}"


@dataclass
class RevisionTree:
    revision: str
    entries: dict = field(default_factory=dict)  # path -> content hash

    def copy(self) -> "RevisionTree":
        return RevisionTree(self.revision, dict(self.entries))

    def __eq__(self, other) -> bool:
        # revision strings are the identity; content hashes are auxiliary
        return isinstance(other, RevisionTree) and self.revision == other.revision


def _normalise_prefix(prefix: str) -> str:
    prefix = prefix.strip("/")
    return prefix + "/" if prefix else ""


@dataclass
class WebhookSubscription:
    subscriber: str
    branch: str
    prefix: str
    token: str
    callback: Optional[Callable[[str, str, frozenset], None]] = field(default=None, repr=False)

    def matches(self, branch: str, paths: Iterable[str]) -> bool:
        if branch != self.branch:
            return False
        pfx = _normalise_prefix(self.prefix)
        if not pfx:
            return True
        return any((p.strip("/") + "/").startswith(pfx) for p in paths)


class GitRepository:
    """Branches map to revision trees; each branch keeps its own monotone counter."""

    def __init__(self, name: str = "ssot", token: str = "pat", webhook_delay_ms: int = 0):
        self.name = name
        self.token = token
        self.webhook_delay_ms = int(webhook_delay_ms)
        self.branches: dict[str, RevisionTree] = {"main": RevisionTree(render_revision(0))}
        self._counters: dict[str, int] = {"main": 0}
        self.webhooks: list[WebhookSubscription] = []
        self.deliveries = 0

    # -- queries -------------------------------------------------------
    def head(self, branch: str = "main") -> str:
        return self._tree(branch).revision

    def counter(self, branch: str = "main") -> int:
        self._tree(branch)
        return self._counters[branch]

    def tree(self, branch: str = "main") -> RevisionTree:
        return self._tree(branch).copy()

    def _tree(self, branch: str) -> RevisionTree:
        try:
            return self.branches[branch]
        except KeyError:
            raise GitError(f"unknown branch {branch!r} in repository {self.name!r}") from None

    def dump(self) -> str:
        lines = ["branch,revision,path,content-hash"]
        for branch in sorted(self.branches):
            tree = self.branches[branch]
            if not tree.entries:
                lines.append(f"{branch},{tree.revision},,")
            for path in sorted(tree.entries):
                lines.append(f"{branch},{tree.revision},{path},{tree.entries[path]}")
        return "\n".join(lines) + "\n"

    # -- webhooks ------------------------------------------------------
    def subscribe(self, sub: WebhookSubscription) -> WebhookSubscription:
        if sub.token != self.token:
            raise AuthError(f"webhook for {sub.subscriber!r} presents a token the repository does not accept")
        self._tree(sub.branch)
        self.webhooks.append(sub)
        return sub

    def unsubscribe(self, prefix: str) -> int:
        """Drop every subscription whose subscriber id starts with ``prefix``."""
        before = len(self.webhooks)
        self.webhooks = [w for w in self.webhooks if not w.subscriber.startswith(prefix)]
        return before - len(self.webhooks)

    def _notify(self, sim: Simulator, branch: str, paths: frozenset) -> int:
        revision = self.head(branch)
        fired = 0
        for sub in self.webhooks:
            if sub.matches(branch, paths):
                fired += 1
                sim.after(self.webhook_delay_ms, EventKind.WEBHOOK, sub.callback, branch, revision, paths,
                          label=sub.subscriber)
        self.deliveries += fired
        return fired

    # -- mutations -----------------------------------------------------
    def _commit(self, branch: str, changes: Mapping[str, Optional[str]]) -> frozenset:
        tree = self._tree(branch)
        changed = set()
        for path, content in changes.items():
            path = path.strip("/")
            if content is None:
                if tree.entries.pop(path, None) is not None:
                    changed.add(path)
            else:
                tree.entries[path] = content_hash(content)
                changed.add(path)
        self._counters[branch] += 1
        tree.revision = render_revision(self._counters[branch])
        return frozenset(changed)

    def push(
        self,
        branch: str,
        changes: Mapping[str, Optional[str]],
        rng: RandomSource,
        *,
        token: str,
        latency: Distribution,
        sim: Simulator,
    ) -> tuple[str, float]:
        """Commit ``changes`` (path -> manifest text, or None to delete) to ``branch``.

        The push lands after a latency drawn from ``latency``; webhooks fire when it lands.
        Returns the new revision and the push time in seconds.
        """
        if token != self.token:
            raise AuthError("push token does not match repository token")
        self._tree(branch)
        if not changes:
            raise GitError("empty change set")
        paths = self._commit(branch, changes)
        t_push = to_ms(latency.sample(rng))
        sim.after(t_push, EventKind.PUSH_ARRIVED, self._notify, sim, branch, paths, label=branch)
        return self.head(branch), to_seconds(t_push)

    def commit(self, branch: str, changes: Mapping[str, Optional[str]]) -> str:
        """Commit ``changes`` immediately without push latency or webhooks."""
        if not changes:
            raise GitError("empty change set")
        self._commit(branch, changes)
        return self.head(branch)

    def remove(self, branch: str, prefix: str) -> int:
        """Delete every path starting with ``prefix`` without notifying (garbage collection)."""
        tree = self._tree(branch)
        prefix = prefix.strip("/")
        doomed = [p for p in tree.entries if p.startswith(prefix)]
        if doomed:
            self._commit(branch, {p: None for p in doomed})
        return len(doomed)

    def create_branch(self, name: str, source: str = "main") -> RevisionTree:
        src = self._tree(source)
        if name in self.branches:
            raise GitError(f"branch {name!r} already exists")
        self.branches[name] = src.copy()
        self._counters[name] = self._counters[source]
        return self.tree(name)

    def delete_branch(self, name: str) -> None:
        if name == "main":
            raise GitError("refusing to delete main")
        self._tree(name)
        del self.branches[name]
        del self._counters[name]

    def merge(self, source: str, into: str, sim: Simulator) -> str:
        """Merge ``source`` into ``into``; source entries win on conflict."""
        if source == into:
            raise GitError(f"cannot merge branch {source!r} into itself")
        src, dst = self._tree(source), self._tree(into)
        diff = {p: h for p, h in src.entries.items() if dst.entries.get(p) != h}
        dst.entries.update(diff)
        self._counters[into] += 1
        dst.revision = render_revision(self._counters[into])
        self._notify(sim, into, frozenset(diff))
        return dst.revision
