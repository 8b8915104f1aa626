"""Action-library web agent: thin Python surface over the C++ core.

The extension module exchanges JSON strings; this wrapper turns them into
dicts/lists so callers stay in plain Python.
"""

import json as _json

from _paffa import (  # noqa: F401
    PaffaError,
    __version__,
    count_tokens,
)
import _paffa as _core


class SimSession:
    """Session over a simulator site spec; scripts and traces are dicts."""

    def __init__(self, site_spec):
        self._inner = _core.SimSession(site_spec)

    def run_script(self, script):
        return _json.loads(self._inner.run_script(_json.dumps(script)))

    def page_id(self):
        return self._inner.page_id()

    def html(self):
        return self._inner.html()

    def goal(self, name):
        return self._inner.goal(name)

    def reset(self):
        self._inner.reset()


def validate_script(script):
    return _json.loads(_core.validate_script(_json.dumps(script)))


def substitute_params(api, bindings):
    return _json.loads(_core.substitute_params(_json.dumps(api), _json.dumps(bindings)))


def script_signature(script):
    return _core.script_signature(_json.dumps(script))


def scan_interactive_elements(html):
    return _json.loads(_core.scan_interactive_elements(html))


def token_report(paffa_total, baseline_tokens_per_call=1565, baseline_calls=126):
    return _json.loads(_core.token_report(paffa_total, baseline_tokens_per_call, baseline_calls))


def accuracy(predicted, gold, reference_html="", mode="inexact"):
    return _json.loads(
        _core.accuracy(_json.dumps(predicted), _json.dumps(gold), reference_html, mode)
    )


def run_request(request, site_spec, fixtures, prompts="", library=""):
    return _json.loads(_core.run_request(request, site_spec, fixtures, prompts, library))
