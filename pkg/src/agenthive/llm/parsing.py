"""Parsers turning raw model text into typed payloads.

The templates impose terminal ``ANSWER:``/``CONFIDENCE:`` lines (and
``KIND:``/``TARGET:`` for debate turns). The last occurrence wins, since
chain-of-thought text may mention those words earlier.
"""

from __future__ import annotations

import logging
import math
import re
from typing import Iterable

from ..errors import AnswerOutOfDomain, ParseIncomplete, UnknownKind, UnknownTarget
from ..memory_pool import AgentOutput, DebateArgument, DebateKind

logger = logging.getLogger(__name__)


def _field_re(name: str) -> re.Pattern[str]:
    # tolerates markdown decoration such as "**ANSWER:** C" or "- Answer: C"
    return re.compile(rf"^[ \t>*#_\-]*{name}[ \t*_]*[:=][ \t*_]*(.*)$", re.IGNORECASE | re.MULTILINE)


_ANSWER = re.compile(r"(?<![A-Za-z])answer[ \t*_]*[:=][ \t*_]*(.*)$", re.IGNORECASE | re.MULTILINE)
_CONFIDENCE = re.compile(r"(?<![A-Za-z])confidence[ \t*_]*[:=][ \t*_]*(.*)$", re.IGNORECASE | re.MULTILINE)
_KIND = _field_re("kind")
_TARGET = _field_re("target")
_ROLE = _field_re("role")
_WHY = _field_re("(?:reasoning|rationale)")

_NUMBER = re.compile(r"[-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?(\s*%)?")
_OPTION = re.compile(r"^(?:option|choice)?\s*[(\[]?\s*([A-Za-z])\s*[)\]]?(?=$|[\s.:,;)\-])", re.IGNORECASE)
_SYNONYMS = {
    "yes": "yes", "y": "yes", "true": "yes",
    "no": "no", "n": "no", "false": "no",
    "maybe": "maybe", "uncertain": "maybe", "possibly": "maybe", "unclear": "maybe",
}
_DEBATE_KINDS = {
    "rebuttal": DebateKind.REBUTTAL,
    "defense": DebateKind.DEFENSE,
    "defence": DebateKind.DEFENSE,
    "defend": DebateKind.DEFENSE,
    "proposal": DebateKind.PROPOSAL,
    "propose": DebateKind.PROPOSAL,
}


def _last(pattern: re.Pattern[str], text: str) -> re.Match[str] | None:
    match = None
    for match in pattern.finditer(text):
        pass
    return match


def _clean(value: str) -> str:
    return value.strip().strip("*_`\"'").strip()


def normalize_label(raw: str, domain: Iterable[str]) -> str:
    """Map free-form answer text onto a label of ``domain``.

    Raises:
        AnswerOutOfDomain: nothing in ``raw`` identifies a domain label.
    """
    domain = tuple(domain)
    value = _clean(raw)
    lowered = {lab.lower(): lab for lab in domain}
    if value.lower() in lowered:
        return lowered[value.lower()]
    if all(len(lab) == 1 for lab in domain):
        m = _OPTION.match(value)
        if m and m.group(1).upper() in domain:
            return m.group(1).upper()
    else:
        first = re.split(r"[\s.,;:!()]+", value.lower(), maxsplit=1)[0] if value else ""
        mapped = _SYNONYMS.get(first, first)
        if mapped in lowered:
            return lowered[mapped]
    raise AnswerOutOfDomain(value, domain)


def parse_confidence(raw: str) -> float:
    m = _NUMBER.search(raw)
    if m is None:
        raise ParseIncomplete(f"no number in confidence field {raw!r}")
    number = m.group(0)
    value = float(number.rstrip("% \t"))
    if m.group(1):
        value /= 100.0
    if math.isnan(value):
        raise ParseIncomplete("confidence is NaN")
    clamped = min(1.0, max(0.0, value))
    if clamped != value:
        logger.info("confidence %r clamped to %r", value, clamped)
    return clamped


def parse_agent_output(raw: str, domain: Iterable[str]) -> AgentOutput:
    """Extract ``(reasoning, answer, confidence)`` from a model reply.

    Raises:
        ParseIncomplete: the ANSWER or CONFIDENCE line is missing or empty.
        AnswerOutOfDomain: the ANSWER line names no label of ``domain``.
    """
    domain = tuple(domain)
    answer_m = _last(_ANSWER, raw)
    if answer_m is None or not _clean(answer_m.group(1)):
        raise ParseIncomplete("missing ANSWER line")
    answer = normalize_label(answer_m.group(1), domain)
    conf_m = _last(_CONFIDENCE, raw)
    if conf_m is None:
        raise ParseIncomplete("missing CONFIDENCE line")
    confidence = parse_confidence(conf_m.group(1))
    reasoning = raw[: answer_m.start()].rstrip(" \t*_#>-").strip()
    return AgentOutput(reasoning=reasoning, answer=answer, confidence=confidence)


def parse_target(raw: str) -> int | None:
    m = re.search(r"\d+", raw)
    return int(m.group(0)) if m else None


def parse_debate_output(raw: str, peer_ids: Iterable[int]) -> DebateArgument:
    """Parse a debate turn: ``KIND:`` line, optional ``TARGET: A<j>``, then the argument."""
    kind_m = _KIND.search(raw)
    if kind_m is None:
        raise ParseIncomplete("missing KIND line")
    word = _clean(kind_m.group(1)).split(maxsplit=1)
    word = word[0].lower().strip(".,;:") if word else ""
    if word not in _DEBATE_KINDS:
        raise UnknownKind(f"unknown debate kind {kind_m.group(1).strip()!r}")
    kind = _DEBATE_KINDS[word]
    body = raw[kind_m.end():]
    target = None
    target_m = _TARGET.search(body)
    if target_m is not None:
        body = body[: target_m.start()] + body[target_m.end():]
    if kind is DebateKind.REBUTTAL:
        if target_m is None:
            raise ParseIncomplete("Rebuttal without TARGET line")
        target = parse_target(target_m.group(1))
        if target is None or target not in set(peer_ids):
            raise UnknownTarget(f"target {target_m.group(1).strip()!r} is not a peer")
    argument = body.strip()
    if not argument:
        raise ParseIncomplete("empty debate argument")
    return DebateArgument(kind=kind, argument=argument, target=target)


def parse_role(raw: str) -> tuple[str, str]:
    """Return ``(role, reasoning)`` from a ``ROLE:`` / ``REASONING:`` reply."""
    role_m = _ROLE.search(raw)
    if role_m is None or not _clean(role_m.group(1)):
        raise ParseIncomplete("missing ROLE line")
    why_m = _WHY.search(raw, role_m.end())
    reasoning = raw[why_m.start(1):].strip() if why_m else raw[role_m.end():].strip()
    return _clean(role_m.group(1)), reasoning
