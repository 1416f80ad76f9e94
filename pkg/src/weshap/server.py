"""Local HTTP JSON API over a computed report, backing the triage dashboard.

Read-only with respect to the input files: what-if revisions (disabling LFs
and/or muting weak labels below a threshold) are recomputed in memory and
kept in a per-process session history.  What-if requests are serialized
through a lock so concurrent clicks cannot interleave recomputations.

Endpoints (all JSON, all carrying the input fingerprint):
    GET  /api/v1/report                 full valuation report
    GET  /api/v1/lfs                    LF table only
    GET  /api/v1/explain?val_idx=&top_k= per-point influence breakdown
    GET  /api/v1/curve?metric=          ranking curve for one method
    POST /api/v1/whatif                 {"disabled_lfs": [...], "theta": number|null}
    GET  /api/v1/session                what-if history for this session
Static dashboard assets are served from --static-dir at /.
"""

from __future__ import annotations

import json
import mimetypes
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

import numpy as np

from .data import ABSTAIN, ProxyConfig, SplitBundle, WeakLabelMatrix
from .engine import explain, weshap_dataset
from .evaluate import METHODS, baseline_scores, downstream_accuracy, rank_curve
from .report import build_report


class ReportService:
    """Owns the base report plus in-memory what-if state for one session."""

    def __init__(self, bundle: SplitBundle, config: ProxyConfig, fingerprint: str, seed: int = 0):
        self.bundle = bundle
        self.config = config
        self.fingerprint = fingerprint
        self.seed = seed
        self.result = weshap_dataset(bundle, config)
        self.report = build_report(bundle, config, self.result, fingerprint, seed=seed)
        self._dense = self.result.contributions.to_dense()
        self._lock = threading.Lock()
        self._curves: dict[str, dict] = {}
        self.history: list[dict] = []

    def lf_table(self) -> dict:
        return {"fingerprint": self.fingerprint, "lf_table": self.report["lf_table"]}

    def explain_point(self, val_idx: int, top_k: int) -> dict:
        payload = explain(val_idx, self.result, self.bundle, self.config, top_k=top_k).to_json_dict()
        payload["fingerprint"] = self.fingerprint
        return payload

    def curve(self, method: str) -> dict:
        method = method.upper()
        if method not in METHODS:
            raise ValueError(f"unknown metric {method!r}")
        if self.bundle.test is None:
            raise ValueError("bundle has no test set; curves are unavailable")
        cached = self._curves.get(method)
        if cached is None:
            scores = baseline_scores(method, self.bundle, seed=self.seed, config=self.config)
            curve = rank_curve(scores, self.bundle, self.config)
            cached = {
                "fingerprint": self.fingerprint,
                "method": method,
                "prefix_sizes": curve.prefix_sizes,
                "accuracies": curve.accuracies,
                "area": curve.area,
            }
            self._curves[method] = cached
        return cached

    def whatif(self, disabled_lfs: list[int], theta: float | None) -> dict:
        bad = [j for j in disabled_lfs if not 0 <= int(j) < self.bundle.num_lfs]
        if bad:
            raise ValueError(f"disabled_lfs out of range: {bad}")
        with self._lock:
            entries = self.bundle.weak_labels.entries.copy()
            if disabled_lfs:
                entries[:, [int(j) for j in disabled_lfs]] = ABSTAIN
            if theta is not None:
                mute = (entries != ABSTAIN) & (self._dense < float(theta))
                entries[mute] = ABSTAIN

            valid_acc = downstream_accuracy(entries, self.bundle, self.config, self.bundle.valid)
            test_acc = None
            if self.bundle.test is not None:
                test_acc = downstream_accuracy(entries, self.bundle, self.config, self.bundle.test)

            revised = SplitBundle(
                train_features=self.bundle.train_features,
                weak_labels=WeakLabelMatrix(entries, self.bundle.weak_labels.lf_names),
                valid=self.bundle.valid,
                spec=self.bundle.spec,
                valid_weak_labels=self.bundle.valid_weak_labels,
                test=self.bundle.test,
            )
            lf_values = weshap_dataset(revised, self.config).values

            payload = {
                "fingerprint": self.fingerprint,
                "disabled_lfs": sorted(int(j) for j in disabled_lfs),
                "theta": theta,
                "valid_acc": valid_acc,
                "test_acc": test_acc,
                "lf_values": [float(v) for v in lf_values],
            }
            self.history.append(
                {
                    "action": {"disabled_lfs": payload["disabled_lfs"], "theta": theta},
                    "valid_acc": valid_acc,
                    "test_acc": test_acc,
                }
            )
            return payload

    def session(self) -> dict:
        return {"fingerprint": self.fingerprint, "history": self.history}


def _make_handler(service: ReportService, static_dir: Path | None):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, fmt, *args):  # quiet by default
            pass

        def _send_json(self, payload: dict, status: int = 200) -> None:
            body = json.dumps(payload).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _send_error_json(self, message: str, status: int = 400) -> None:
            self._send_json({"error": message, "fingerprint": service.fingerprint}, status)

        def do_GET(self) -> None:
            url = urlparse(self.path)
            query = parse_qs(url.query)
            try:
                if url.path == "/api/v1/report":
                    self._send_json(service.report)
                elif url.path == "/api/v1/lfs":
                    self._send_json(service.lf_table())
                elif url.path == "/api/v1/explain":
                    val_idx = int(query.get("val_idx", ["0"])[0])
                    top_k = int(query.get("top_k", ["5"])[0])
                    self._send_json(service.explain_point(val_idx, top_k))
                elif url.path == "/api/v1/curve":
                    metric = query.get("metric", ["WESHAP"])[0]
                    self._send_json(service.curve(metric))
                elif url.path == "/api/v1/session":
                    self._send_json(service.session())
                else:
                    self._serve_static(url.path)
            except ValueError as exc:
                self._send_error_json(str(exc))

        def do_POST(self) -> None:
            url = urlparse(self.path)
            if url.path != "/api/v1/whatif":
                self._send_error_json("unknown endpoint", 404)
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
                body = json.loads(self.rfile.read(length) or b"{}")
                disabled = body.get("disabled_lfs", []) or []
                theta = body.get("theta")
                self._send_json(service.whatif(list(disabled), theta))
            except (ValueError, json.JSONDecodeError) as exc:
                self._send_error_json(str(exc))

        def _serve_static(self, path: str) -> None:
            if static_dir is None:
                if path == "/":
                    body = _FALLBACK_PAGE.encode()
                    self.send_response(200)
                    self.send_header("Content-Type", "text/html")
                    self.send_header("Content-Length", str(len(body)))
                    self.end_headers()
                    self.wfile.write(body)
                    return
                self._send_error_json("not found", 404)
                return
            rel = path.lstrip("/") or "index.html"
            target = (static_dir / rel).resolve()
            if not str(target).startswith(str(static_dir.resolve())) or not target.is_file():
                self._send_error_json("not found", 404)
                return
            ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
            body = target.read_bytes()
            self.send_response(200)
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

    return Handler


_FALLBACK_PAGE = """<!doctype html>
<html><head><title>weshap report service</title></head>
<body><h1>weshap report service</h1>
<p>No dashboard assets configured; the JSON API lives under <code>/api/v1/</code>.</p>
</body></html>
"""


def serve_report(
    bundle: SplitBundle,
    config: ProxyConfig,
    fingerprint: str,
    host: str = "127.0.0.1",
    port: int = 8787,
    seed: int = 0,
    static_dir: str | None = None,
) -> None:
    """Start the blocking HTTP server."""
    service = ReportService(bundle, config, fingerprint, seed=seed)
    handler = _make_handler(service, Path(static_dir) if static_dir else None)
    server = ThreadingHTTPServer((host, port), handler)
    print(
        f"serving on http://{host}:{server.server_address[1]} (fingerprint {fingerprint[:12]})",
        flush=True,
    )
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
