"""Pluggable rationale/normalization backends.

The rule reasoner is deterministic and is what every test depends on. A
chat-model client can be dropped in for nicer prose, but it only ever
rewrites text: state transitions, gating, and the intent grammar never
depend on it.
"""

from __future__ import annotations

import json
from typing import Callable, Optional


class RuleReasoner:
    """Template-based, deterministic text generation."""

    def normalize(self, text: str) -> str:
        return " ".join(text.strip().split())

    def rationale(self, stage: str, context: dict) -> str:
        ctx = json.dumps(context, sort_keys=True, default=str)
        return f"[{stage}] derived from {ctx}"


class ChatReasoner:
    """Adapter for any chat-completion callable: messages -> text.

    Falls back to the rule reasoner on any transport failure, so a dead
    endpoint can never stall a session.
    """

    def __init__(self, complete: Callable[[list[dict]], str]):
        self._complete = complete
        self._fallback = RuleReasoner()

    def normalize(self, text: str) -> str:
        try:
            out = self._complete(
                [
                    {
                        "role": "system",
                        "content": "Rewrite the operator request as one plain sentence. "
                        "Keep every number, unit, sector name and traffic class verbatim.",
                    },
                    {"role": "user", "content": text},
                ]
            )
            return out.strip() or text
        except Exception:
            return self._fallback.normalize(text)

    def rationale(self, stage: str, context: dict) -> str:
        try:
            out = self._complete(
                [
                    {
                        "role": "system",
                        "content": f"Summarize this {stage} evidence in two sentences.",
                    },
                    {"role": "user", "content": json.dumps(context, default=str)},
                ]
            )
            return out.strip() or self._fallback.rationale(stage, context)
        except Exception:
            return self._fallback.rationale(stage, context)


def make_reasoner(mode: str = "rule", complete: Optional[Callable] = None):
    if mode == "rule" or complete is None:
        return RuleReasoner()
    return ChatReasoner(complete)


def http_chat_completer(endpoint: str, api_key: Optional[str] = None, model: str = ""):
    """Chat-completion callable over a plain OpenAI-style HTTP endpoint.

    Only free-text normalization and rationale prose ever flow through
    this; protocol decisions never do.
    """
    import json as _json
    import urllib.request

    def complete(messages: list[dict]) -> str:
        body = {"messages": messages}
        if model:
            body["model"] = model
        req = urllib.request.Request(
            endpoint,
            data=_json.dumps(body).encode(),
            headers={
                "Content-Type": "application/json",
                **({"Authorization": f"Bearer {api_key}"} if api_key else {}),
            },
            method="POST",
        )
        with urllib.request.urlopen(req, timeout=10) as resp:
            payload = _json.loads(resp.read())
        return payload["choices"][0]["message"]["content"]

    return complete
