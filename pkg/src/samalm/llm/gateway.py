"""One completion interface over live HTTP, scripted, and replay backends."""
from __future__ import annotations

import enum
import hashlib
import json
import logging
import os
import threading
import time
from collections import defaultdict, deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import httpx

from samalm.llm.errors import (
    GatewayError,
    HttpStatus,
    HttpTimeout,
    ProtocolError,
    RateLimited,
    ReplayMiss,
)

log = logging.getLogger(__name__)


class TagKind(str, enum.Enum):
    ACTOR = "actor"
    CENTRAL_ACTOR = "central_actor"
    LOCAL_CRITIC = "local_critic"
    GLOBAL_CRITIC = "global_critic"


@dataclass(frozen=True)
class PromptTag:
    kind: TagKind
    robot_id: int | None = None

    def __str__(self) -> str:
        return self.kind.value if self.robot_id is None else f"{self.kind.value}:{self.robot_id}"

    @classmethod
    def parse(cls, s: str) -> "PromptTag":
        kind, _, rid = s.partition(":")
        return cls(TagKind(kind), int(rid) if rid else None)

    @classmethod
    def actor(cls, robot_id: int) -> "PromptTag":
        return cls(TagKind.ACTOR, robot_id)

    @classmethod
    def local_critic(cls, robot_id: int) -> "PromptTag":
        return cls(TagKind.LOCAL_CRITIC, robot_id)


GLOBAL_CRITIC = PromptTag(TagKind.GLOBAL_CRITIC)
CENTRAL_ACTOR = PromptTag(TagKind.CENTRAL_ACTOR)


@dataclass(frozen=True)
class Prompt:
    system: str
    user: str
    tag: PromptTag
    nonce: int = 0

    @property
    def prompt_hash(self) -> str:
        payload = json.dumps([self.system, self.user], ensure_ascii=False)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    @property
    def key(self) -> str:
        return f"{self.tag}|{self.nonce}|{self.prompt_hash}"


class Mode(str, enum.Enum):
    HTTP = "http"
    SCRIPTED = "scripted"
    REPLAY = "replay"


@dataclass(frozen=True)
class Completion:
    text: str
    backend: Mode
    latency_ms: float = 0.0
    token_estimate: int = 0


@dataclass(frozen=True)
class ScriptedParams:
    """Knobs for the deterministic stand-in LLM.

    ``fault_mode`` controls unsafe proposals: ``none``, ``random`` (with
    probability ``fault_rate`` per query), ``first_attempt`` (unsafe until
    feedback arrives), ``always``, ``garbage`` (unparseable text) and
    ``zero`` (always stands still).
    """

    fault_mode: str = "none"
    fault_rate: float = 0.1
    progress_weight: float = 20.0
    assumed_radius: float = 0.3
    dt: float = 0.25
    lookahead: int = 2
    contact_margin: float = 0.25
    robot_reach: float = 0.4
    n_th: int = 3

    def __post_init__(self) -> None:
        if self.fault_mode not in {"none", "random", "first_attempt", "always", "garbage", "zero"}:
            raise ValueError(f"unknown fault_mode {self.fault_mode!r}")


@dataclass(frozen=True)
class BackendConfig:
    mode: Mode = Mode.SCRIPTED
    endpoint_url: str | None = None
    api_key: str | None = field(default=None, repr=False)
    model_name: str | None = None
    temperature: float = 0.2
    critic_temperature: float = 0.0
    timeout_s: float = 30.0
    max_retries: int = 3
    backoff_s: float = 0.5
    transcript_path: str | None = None
    max_workers: int = 8
    scripted: ScriptedParams = field(default_factory=ScriptedParams)

    def validate(self) -> None:
        if self.mode is Mode.HTTP and not (self.endpoint_url and self.api_key):
            raise ValueError("http backend needs endpoint_url and api_key (SAMALM_API_URL / SAMALM_API_KEY)")
        if self.mode is Mode.REPLAY and not self.transcript_path:
            raise ValueError("replay backend needs transcript_path")
        if self.max_retries < 0 or self.timeout_s <= 0:
            raise ValueError("max_retries must be >= 0 and timeout_s > 0")

    @classmethod
    def from_env(cls, **overrides: Any) -> "BackendConfig":
        base = dict(
            mode=Mode.HTTP,
            endpoint_url=os.environ.get("SAMALM_API_URL"),
            api_key=os.environ.get("SAMALM_API_KEY"),
            model_name=os.environ.get("SAMALM_MODEL", "gpt-4o"),
        )
        base.update(overrides)
        return cls(**base)

    def to_json(self) -> dict[str, Any]:
        d = asdict(self)
        d["mode"] = self.mode.value
        d.pop("api_key")
        return d

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "BackendConfig":
        d = dict(d)
        d.pop("api_key", None)
        if "mode" in d:
            d["mode"] = Mode(d["mode"])
        if "scripted" in d:
            d["scripted"] = ScriptedParams(**d["scripted"])
        return cls(**d)


_transcript_locks: dict[str, threading.Lock] = defaultdict(threading.Lock)


def record_transcript(prompt: Prompt, completion: Completion, path: str | os.PathLike) -> None:
    """Append one JSONL entry; IO errors propagate."""
    entry = {
        "tag": str(prompt.tag),
        "nonce": prompt.nonce,
        "prompt_hash": prompt.prompt_hash,
        "prompt": {"system": prompt.system, "user": prompt.user},
        "completion": completion.text,
        "latency_ms": completion.latency_ms,
    }
    line = json.dumps(entry, ensure_ascii=False) + "\n"
    p = str(path)
    with _transcript_locks[p]:
        with open(p, "a", encoding="utf-8") as fh:
            fh.write(line)


def load_transcript(path: str | os.PathLike) -> dict[str, deque]:
    index: dict[str, deque] = defaultdict(deque)
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            e = json.loads(line)
            key = f"{e['tag']}|{e['nonce']}|{e['prompt_hash']}"
            index[key].append(e)
    return index


def estimate_tokens(text: str) -> int:
    return max(1, len(text) // 4)


class Gateway:
    """Thread-safe completion client bound to one ``BackendConfig``."""

    def __init__(self, cfg: BackendConfig):
        cfg.validate()
        self.cfg = cfg
        self._lock = threading.Lock()
        self._replay: dict[str, deque] | None = None
        self._last: dict[str, dict] = {}
        self._client: httpx.Client | None = None

    def close(self) -> None:
        if self._client is not None:
            self._client.close()
            self._client = None

    def __enter__(self) -> "Gateway":
        return self

    def __exit__(self, *exc: object) -> None:
        self.close()

    def complete(self, prompt: Prompt) -> Completion:
        mode = self.cfg.mode
        if mode is Mode.SCRIPTED:
            from samalm.llm.scripted import scripted_complete

            text = scripted_complete(prompt, self.cfg.scripted)
            comp = Completion(text, mode, 0.0, estimate_tokens(text))
        elif mode is Mode.REPLAY:
            comp = self._replay_complete(prompt)
        else:
            comp = self._http_complete(prompt)
        if self.cfg.transcript_path and mode is not Mode.REPLAY:
            record_transcript(prompt, comp, self.cfg.transcript_path)
        return comp

    def complete_many(self, prompts: Sequence[Prompt]) -> list[Completion]:
        """Issue prompts concurrently; results come back in request order."""
        if self.cfg.mode is not Mode.HTTP or len(prompts) <= 1:
            return [self.complete(p) for p in prompts]
        with ThreadPoolExecutor(max_workers=min(self.cfg.max_workers, len(prompts))) as pool:
            futures = {i: pool.submit(self.complete, p) for i, p in enumerate(prompts)}
            return [futures[i].result() for i in range(len(prompts))]

    def _replay_complete(self, prompt: Prompt) -> Completion:
        key = prompt.key
        with self._lock:
            if self._replay is None:
                self._replay = load_transcript(self.cfg.transcript_path)
            queue = self._replay.get(key)
            if queue:
                entry = queue.popleft()
                self._last[key] = entry
            elif key in self._last:
                entry = self._last[key]
            else:
                raise ReplayMiss(key)
        text = entry["completion"]
        return Completion(text, Mode.REPLAY, float(entry.get("latency_ms", 0.0)), estimate_tokens(text))

    def _url(self) -> str:
        url = self.cfg.endpoint_url.rstrip("/")
        if not url.endswith("/chat/completions"):
            url += "/chat/completions"
        return url

    def _http_once(self, prompt: Prompt) -> str:
        if self._client is None:
            with self._lock:
                if self._client is None:
                    self._client = httpx.Client(timeout=self.cfg.timeout_s)
        critic = prompt.tag.kind in (TagKind.LOCAL_CRITIC, TagKind.GLOBAL_CRITIC)
        payload = {
            "model": self.cfg.model_name,
            "messages": [
                {"role": "system", "content": prompt.system},
                {"role": "user", "content": prompt.user},
            ],
            "temperature": self.cfg.critic_temperature if critic else self.cfg.temperature,
        }
        headers = {"Authorization": f"Bearer {self.cfg.api_key}"}
        try:
            resp = self._client.post(self._url(), json=payload, headers=headers)
        except httpx.TimeoutException as exc:
            raise HttpTimeout(f"timed out after {self.cfg.timeout_s}s: {exc}") from exc
        except httpx.TransportError as exc:
            raise HttpTimeout(f"transport failure: {exc}") from exc
        if resp.status_code == 429:
            raise RateLimited(resp.text)
        if resp.status_code >= 400:
            raise HttpStatus(resp.status_code, resp.text)
        try:
            text = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"malformed chat completion: {resp.text[:200]}") from exc
        if not isinstance(text, str) or not text:
            raise ProtocolError("empty completion content")
        return text

    def _http_complete(self, prompt: Prompt) -> Completion:
        attempt = 0
        while True:
            t0 = time.perf_counter()
            try:
                text = self._http_once(prompt)
            except GatewayError as exc:
                if not exc.transient or attempt >= self.cfg.max_retries:
                    raise
                delay = self.cfg.backoff_s * (2**attempt)
                log.warning("%s failed (%s); retry %d in %.2fs", prompt.tag, exc, attempt + 1, delay)
                time.sleep(delay)
                attempt += 1
                continue
            latency = (time.perf_counter() - t0) * 1000.0
            return Completion(text, Mode.HTTP, latency, estimate_tokens(text))


def complete(prompt: Prompt, cfg: BackendConfig) -> Completion:
    """One-shot convenience wrapper; long runs should hold a ``Gateway``."""
    with Gateway(cfg) as gw:
        return gw.complete(prompt)
