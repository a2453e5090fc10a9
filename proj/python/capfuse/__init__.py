"""Python bindings for the capfuse caption fusion engine."""

import json
import os

from ._capfuse import (
    CapfuseError,
    canonical_event,
    format_tag,
    gesture_vocabulary,
    parse_tag,
    tone_vocabulary,
)
from . import _capfuse

__all__ = [
    "CapfuseError",
    "apply_preferences",
    "canonical_event",
    "format_tag",
    "gesture_vocabulary",
    "parse_tag",
    "render",
    "render_directives",
    "replay",
    "replay_text",
    "tone_vocabulary",
]


def render(segment, profile):
    """Caption text for a segment dict (``tokens`` plus ``annotations``) under a full profile dict."""
    return _capfuse._render(json.dumps(segment), json.dumps(profile))


def apply_preferences(patch, profile=None):
    """Validates ``patch`` and applies it to ``profile`` (defaults when omitted); returns the new profile."""
    base = "" if profile is None else json.dumps(profile)
    return json.loads(_capfuse._apply_preferences(base, json.dumps(patch)))


def render_directives(profile):
    """Display directives (colours, scale, anchor, line budget) for a full profile dict."""
    return json.loads(_capfuse._render_directives(json.dumps(profile)))


def replay(path, config=None):
    """Replays a session file as fast as possible. Returns ``{"transcript": [...], "metrics": {...}}``."""
    return json.loads(_capfuse._replay_file(os.fspath(path), "" if config is None else os.fspath(config)))


def replay_text(ndjson, config_text=""):
    """Like :func:`replay` for session text held in memory."""
    return json.loads(_capfuse._replay_text(ndjson, config_text))
