"""Chat clients behind the gateway: a chat-completion HTTP client and a scripted stub."""

import threading
from collections import deque
from collections.abc import Callable

import httpx

import core.logging as logging
from core.utils import call_with_retry
from llm.gateway import ChatClient, Completion, GatewayError, GenConfig, TransportError

_RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})


class _RetryableStatusError(Exception):
    def __init__(self, status_code: int) -> None:
        self.status_code = status_code
        super().__init__(f"HTTP {status_code}")


class HttpChatClient(ChatClient):
    """POSTs chat-completion requests (``messages``, ``temperature``, ``max_tokens``)."""

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str | None = None,
        timeout: float = 30.0,
        attempts: int = 3,
        backoff_seconds: float = 1.0,
        client: httpx.Client | None = None,
    ) -> None:
        self.url = f"{base_url.rstrip('/')}/chat/completions"
        self.model = model
        self.attempts = attempts
        self.backoff_seconds = backoff_seconds
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = client or httpx.Client(timeout=timeout, headers=headers)

    def _post(self, payload: dict) -> dict:
        response = self._client.post(self.url, json=payload)
        if response.status_code in _RETRYABLE_STATUS:
            raise _RetryableStatusError(response.status_code)
        response.raise_for_status()
        return response.json()

    def complete(self, prompt: str, cfg: GenConfig, template_id: str) -> Completion:
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_tokens,
        }
        try:
            body = call_with_retry(
                lambda: self._post(payload),
                attempts=self.attempts,
                backoff_seconds=self.backoff_seconds,
                retry_on=(httpx.TransportError, _RetryableStatusError),
            )
        except (httpx.TransportError, _RetryableStatusError) as e:
            logging.error(f"{template_id} call to {self.url} failed after {self.attempts} attempt(s): {e}")
            raise TransportError(f"{self.url}: {e}") from e
        except (httpx.HTTPStatusError, ValueError) as e:
            raise GatewayError(f"{self.url}: {e}") from e

        try:
            choice = body["choices"][0]
            text = choice["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as e:
            raise GatewayError(f"{self.url}: response has no choices[0].message.content") from e
        return Completion(text=text, finish_reason=choice.get("finish_reason"))

    def close(self) -> None:
        self._client.close()


Script = list[str] | Callable[[str], str | Completion]


class ScriptExhaustedError(GatewayError):
    """Raised when a queued script has no responses left for a template."""


class ScriptedClient(ChatClient):
    """Offline client answering from per-template scripts.

    A script is either a queue of responses consumed in call order or a callable
    receiving the rendered prompt. Every prompt is kept in ``calls``."""

    def __init__(self, scripts: dict[str, Script]) -> None:
        self._lock = threading.Lock()
        self._queues: dict[str, deque[str]] = {}
        self._functions: dict[str, Callable[[str], str | Completion]] = {}
        for template_id, script in scripts.items():
            if callable(script):
                self._functions[template_id] = script
            else:
                self._queues[template_id] = deque(script)
        self.calls: list[tuple[str, str]] = []

    def prompts_for(self, template_id: str) -> list[str]:
        with self._lock:
            return [prompt for tid, prompt in self.calls if tid == template_id]

    def complete(self, prompt: str, cfg: GenConfig, template_id: str) -> Completion:
        with self._lock:
            self.calls.append((template_id, prompt))
            if template_id in self._functions:
                function = self._functions[template_id]
            else:
                queue = self._queues.get(template_id)
                if not queue:
                    raise ScriptExhaustedError(f"no scripted response left for {template_id}")
                return Completion(queue.popleft())
        result = function(prompt)
        return result if isinstance(result, Completion) else Completion(result)
