"""Provider-agnostic boundary to multimodal LLM backends.

Covers request shaping, video token budgeting, the split-into-segments
fallback for recordings that exceed the context window, bounded retries with
exponential backoff, and two backends: a deterministic offline mock keyed by
(sample, criterion) and a generic HTTP adapter.

Token accounting: each extracted video frame costs 258 tokens at the
provider's default sampling; prompt text is approximated at 4 characters per
token. Frame counts round up, so sub-second tails cost one full frame.
"""

from __future__ import annotations

import json
import math
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import httpx

from .errors import ConfalyzerError

TOKENS_PER_FRAME = 258
CHARS_PER_TOKEN = 4
DEFAULT_API_KEY_ENV = "CONFALYZER_API_KEY"


class GatewayError(ConfalyzerError):
    """Backend call failure; ``retryable`` controls the retry loop."""

    retryable = False

    def __init__(self, message: str, attempts: int = 1):
        super().__init__(message)
        self.attempts = attempts


class TransportError(GatewayError):
    """Network-level failure (connection, timeout, 5xx)."""

    retryable = True


class RateLimitError(GatewayError):
    """Provider rate limit (HTTP 429)."""

    retryable = True


class ProviderRejection(GatewayError):
    """Provider rejected the request (4xx other than 429); retrying won't help."""


class BudgetExceeded(GatewayError):
    """Request would not fit the model context; caller must segment."""


class InfeasibleSegmentation(GatewayError):
    """Even a one-second segment exceeds the token budget."""


@dataclass(frozen=True)
class ModelParams:
    model_name: str = "mock"
    temperature: float = 0.0
    frames_per_second: float = 1.0
    max_context_tokens: int = 1_000_000
    max_output_tokens: int = 8_192

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ConfalyzerError("temperature must be >= 0")
        if self.frames_per_second <= 0:
            raise ConfalyzerError("frames_per_second must be > 0")
        if self.max_context_tokens <= 0 or self.max_output_tokens <= 0:
            raise ConfalyzerError("token limits must be > 0")


@dataclass(frozen=True)
class AnalyzeRequest:
    video_path: str
    duration_s: float
    system_text: str
    user_text: str
    params: ModelParams
    sample_id: int
    criterion_id: str
    # Segment window within the recording; None means the whole video.
    window: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if self.duration_s <= 0:
            raise ConfalyzerError("video duration must be > 0")

    @property
    def window_duration_s(self) -> float:
        if self.window is None:
            return self.duration_s
        start, end = self.window
        return end - start


@dataclass(frozen=True)
class RawResponse:
    text: str
    latency_s: float
    input_tokens: int
    output_tokens: int
    backend_id: str

    def __post_init__(self) -> None:
        if self.latency_s < 0:
            raise ConfalyzerError("latency must be >= 0")


@dataclass(frozen=True)
class SegmentPlan:
    """Contiguous, non-overlapping half-open intervals covering [0, duration)."""

    segments: tuple[tuple[float, float], ...]

    def __len__(self) -> int:
        return len(self.segments)


def estimate_video_tokens(duration_s: float, params: ModelParams) -> int:
    """Token cost of a recording: ceil(duration * fps) frames at 258 tokens each."""
    if duration_s < 0:
        raise ConfalyzerError("duration must be >= 0")
    if duration_s == 0:
        return 0
    return _ceil_frames(duration_s, params.frames_per_second) * TOKENS_PER_FRAME


def _ceil_frames(duration_s: float, fps: float) -> int:
    frames = duration_s * fps
    rounded = round(frames)
    # Guard float noise: 299.9999999 frames is 300 frames, not 300 ceil'd to 301.
    if math.isclose(frames, rounded, rel_tol=1e-9, abs_tol=1e-9):
        return max(int(rounded), 1)
    return max(math.ceil(frames), 1)


def estimate_prompt_tokens(*texts: str) -> int:
    return math.ceil(sum(len(t) for t in texts) / CHARS_PER_TOKEN)


def plan_segments(duration_s: float, params: ModelParams, prompt_tokens: int) -> SegmentPlan:
    """Fewest equal-length segments such that each fits the context budget.

    Returns a single segment covering the whole recording when it fits.
    """
    if duration_s <= 0:
        raise ConfalyzerError("duration must be > 0")
    if prompt_tokens >= params.max_context_tokens:
        raise BudgetExceeded(
            f"prompt alone ({prompt_tokens} tokens) exceeds the context budget "
            f"({params.max_context_tokens})"
        )
    video_budget = params.max_context_tokens - prompt_tokens
    frames_per_segment = video_budget // TOKENS_PER_FRAME
    if frames_per_segment < 1:
        raise InfeasibleSegmentation(
            f"video budget of {video_budget} tokens cannot fit a single frame "
            f"({TOKENS_PER_FRAME} tokens)"
        )

    def fits(n: int) -> bool:
        return estimate_video_tokens(duration_s / n, params) + prompt_tokens <= params.max_context_tokens

    total_frames = _ceil_frames(duration_s, params.frames_per_second)
    n = max(1, math.ceil(total_frames / frames_per_segment))
    # Ceiling effects can shift the minimum by one in either direction.
    while n > 1 and fits(n - 1):
        n -= 1
    while not fits(n):
        n += 1

    length = duration_s / n
    bounds = [i * length for i in range(n)] + [duration_s]
    return SegmentPlan(segments=tuple((bounds[i], bounds[i + 1]) for i in range(n)))


class Backend(Protocol):
    """One backend invocation; implementations must be thread-safe."""

    backend_id: str
    deterministic: bool

    def submit(self, request: AnalyzeRequest) -> RawResponse: ...


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    backoff_base_s: float = 1.0
    backoff_factor: float = 2.0


def analyze(
    request: AnalyzeRequest,
    backend: Backend,
    retry: RetryPolicy = RetryPolicy(),
    sleep: Callable[[float], None] = time.sleep,
) -> RawResponse:
    """Submit one request, retrying transient failures with backoff.

    The caller is responsible for segmenting first: a request whose video and
    prompt estimate exceed the context budget is rejected outright.
    """
    prompt_tokens = estimate_prompt_tokens(request.system_text, request.user_text)
    video_tokens = estimate_video_tokens(request.window_duration_s, request.params)
    if prompt_tokens + video_tokens > request.params.max_context_tokens:
        raise BudgetExceeded(
            f"{video_tokens} video + {prompt_tokens} prompt tokens exceed the "
            f"{request.params.max_context_tokens}-token budget; segment the recording"
        )

    last_error: GatewayError | None = None
    for attempt in range(1, retry.max_attempts + 1):
        try:
            return backend.submit(request)
        except GatewayError as exc:
            if not exc.retryable:
                raise
            last_error = exc
            if attempt < retry.max_attempts:
                sleep(retry.backoff_base_s * retry.backoff_factor ** (attempt - 1))
    assert last_error is not None
    raise type(last_error)(
        f"{last_error} (after {retry.max_attempts} attempts)", attempts=retry.max_attempts
    )


class MockBackend:
    """Deterministic offline backend keyed by (sample_id, criterion_id).

    Fixture values are either a plain response string or
    ``{"text": ..., "latency_s": ...}``. Invocations are counted so tests can
    audit exactly how many calls a run issued.
    """

    backend_id = "mock"
    deterministic = True

    def __init__(self, fixtures: dict[str, dict | str]):
        self._fixtures = dict(fixtures)
        self._lock = threading.Lock()
        self.invocations = 0

    @classmethod
    def from_file(cls, path: str | Path) -> "MockBackend":
        try:
            document = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfalyzerError(f"cannot load mock fixture file {path}: {exc}") from exc
        return cls(document)

    @staticmethod
    def fixture_key(sample_id: int, criterion_id: str) -> str:
        return f"{sample_id}/{criterion_id}"

    def submit(self, request: AnalyzeRequest) -> RawResponse:
        with self._lock:
            self.invocations += 1
        key = self.fixture_key(request.sample_id, request.criterion_id)
        try:
            entry = self._fixtures[key]
        except KeyError:
            raise ProviderRejection(f"mock backend has no fixture for cell {key}") from None
        if isinstance(entry, str):
            text, latency = entry, 0.0
        else:
            text, latency = entry["text"], float(entry.get("latency_s", 0.0))
        prompt_tokens = estimate_prompt_tokens(request.system_text, request.user_text)
        video_tokens = estimate_video_tokens(request.window_duration_s, request.params)
        return RawResponse(
            text=text,
            latency_s=latency,
            input_tokens=prompt_tokens + video_tokens,
            output_tokens=estimate_prompt_tokens(text),
            backend_id=self.backend_id,
        )


class HttpBackend:
    """Generic two-step HTTP adapter: upload the recording, then analyze.

    Wire shape (all JSON):
      POST {endpoint}/upload      multipart file -> {"file_id": ...}
      POST {endpoint}/analyze     {model, temperature, frames_per_second,
                                   system, user, video: {file_id, start_s,
                                   end_s}, max_output_tokens}
                                  -> {"text": ..., "input_tokens": ...,
                                      "output_tokens": ...}

    Provider-specific field names stay isolated here; the credential is read
    from the environment, never from files. Uploads are cached per path so a
    sample's 18 criterion calls reuse one upload. A semaphore caps in-flight
    requests and a token bucket caps request rate.
    """

    deterministic = False

    def __init__(
        self,
        endpoint: str,
        model_name: str,
        api_key_env: str = DEFAULT_API_KEY_ENV,
        max_in_flight: int = 4,
        requests_per_second: float = 2.0,
        timeout_s: float = 120.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.model_name = model_name
        self.backend_id = f"http:{model_name}"
        key = os.environ.get(api_key_env, "")
        if not key:
            raise ConfalyzerError(f"environment variable {api_key_env} is not set")
        self._client = httpx.Client(
            base_url=self.endpoint,
            headers={"Authorization": f"Bearer {key}"},
            timeout=timeout_s,
            transport=transport,
        )
        self._slots = threading.Semaphore(max_in_flight)
        self._bucket = _TokenBucket(rate=requests_per_second, capacity=max(1.0, requests_per_second))
        self._uploads: dict[str, str] = {}
        self._upload_lock = threading.Lock()

    def _post(self, path: str, **kwargs) -> httpx.Response:
        self._bucket.take()
        with self._slots:
            try:
                response = self._client.post(path, **kwargs)
            except httpx.HTTPError as exc:
                raise TransportError(f"transport failure calling {path}: {exc}") from exc
        if response.status_code == 429:
            raise RateLimitError(f"rate limited on {path}")
        if response.status_code >= 500:
            raise TransportError(f"server error {response.status_code} on {path}")
        if response.status_code >= 400:
            raise ProviderRejection(f"provider rejected {path}: {response.status_code} {response.text[:200]}")
        return response

    def _upload(self, video_path: str) -> str:
        with self._upload_lock:
            cached = self._uploads.get(video_path)
        if cached:
            return cached
        with open(video_path, "rb") as fh:
            response = self._post("/upload", files={"file": (Path(video_path).name, fh, "video/mp4")})
        try:
            file_id = response.json()["file_id"]
        except (json.JSONDecodeError, KeyError) as exc:
            raise ProviderRejection(f"upload response missing file_id: {exc}") from exc
        with self._upload_lock:
            self._uploads[video_path] = file_id
        return file_id

    def submit(self, request: AnalyzeRequest) -> RawResponse:
        file_id = self._upload(request.video_path)
        window = request.window or (0.0, request.duration_s)
        payload = {
            "model": self.model_name,
            "temperature": request.params.temperature,
            "frames_per_second": request.params.frames_per_second,
            "max_output_tokens": request.params.max_output_tokens,
            "system": request.system_text,
            "user": request.user_text,
            "video": {"file_id": file_id, "start_s": window[0], "end_s": window[1]},
        }
        started = time.monotonic()
        response = self._post("/analyze", json=payload)
        latency = time.monotonic() - started
        try:
            body = response.json()
            text = body["text"]
        except (json.JSONDecodeError, KeyError) as exc:
            raise ProviderRejection(f"analyze response missing text: {exc}") from exc
        return RawResponse(
            text=text,
            latency_s=latency,
            input_tokens=int(body.get("input_tokens", 0)),
            output_tokens=int(body.get("output_tokens", 0)),
            backend_id=self.backend_id,
        )


class _TokenBucket:
    """Blocking token bucket; take() waits until a request token is available."""

    def __init__(self, rate: float, capacity: float):
        self.rate = rate
        self.capacity = capacity
        self._tokens = capacity
        self._updated = time.monotonic()
        self._lock = threading.Lock()

    def take(self) -> None:
        while True:
            with self._lock:
                now = time.monotonic()
                self._tokens = min(self.capacity, self._tokens + (now - self._updated) * self.rate)
                self._updated = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                wait = (1.0 - self._tokens) / self.rate
            time.sleep(wait)
