"""Socket front-end for the simulator: one scenario served to live xApp peers.

Registration over the wire is open (the static-check gate applies to the
package-deployment path, not to raw protocol peers); subscriptions are still
validated against the node capability. Connections are closed after the
scenario finishes plus a short drain so in-flight controls still land, which
is the normal StreamClosed signal for clients.
"""

from __future__ import annotations

import socket
import threading
import time
from pathlib import Path

from ..errors import AutoranError, DeploymentRejected, ProtocolError
from .messages import decode, encode
from .scenario import Scenario
from .sim import RicSim, ScenarioResult

ACCEPT_POLL_S = 0.05
DRAIN_S = 0.3


class SocketSimServer:
    def __init__(
        self,
        scenario: Scenario,
        host: str = "127.0.0.1",
        port: int = 0,
        realtime: bool = False,
        min_xapps: int = 1,
        wait_s: float = 15.0,
    ):
        self.scenario = scenario
        self.sim = RicSim(scenario)
        self.host = host
        self.port = port
        self.realtime = realtime
        self.min_xapps = min_xapps
        self.wait_s = wait_s
        self._listener: socket.socket | None = None
        self._conns: list[socket.socket] = []
        self._threads: list[threading.Thread] = []
        self._stop = threading.Event()

    def start(self) -> tuple[str, int]:
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((self.host, self.port))
        listener.listen(8)
        listener.settimeout(ACCEPT_POLL_S)
        self._listener = listener
        self.port = listener.getsockname()[1]
        thread = threading.Thread(target=self._accept_loop, daemon=True)
        thread.start()
        self._threads.append(thread)
        return self.host, self.port

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            self._conns.append(conn)
            self._send_hello(conn)
            reader = threading.Thread(target=self._reader_loop, args=(conn,), daemon=True)
            reader.start()
            self._threads.append(reader)

    def _send_hello(self, conn: socket.socket) -> None:
        """Server hello announcing the node capability."""
        capability = self.scenario.capability
        hello = self.sim._emit(
            "ric",
            "E2_SETUP",
            {
                "node": "gnb-sim-1",
                "cells": list(capability.cells),
                "metrics": [
                    {"name": m.name, "granularity": m.granularity, "unit": m.unit}
                    for m in capability.metrics
                ],
                "control_points": list(capability.control_points),
            },
        )
        try:
            conn.sendall(encode(hello))
        except OSError:
            pass

    def _reader_loop(self, conn: socket.socket) -> None:
        handle = None
        write_lock = threading.Lock()

        def transport(msg):
            data = encode(msg)
            with write_lock:
                try:
                    conn.sendall(data)
                except OSError:
                    pass

        buffer = b""
        while not self._stop.is_set():
            try:
                chunk = conn.recv(65536)
            except OSError:
                return
            if not chunk:
                return
            buffer += chunk
            while b"\n" in buffer:
                line, buffer = buffer.split(b"\n", 1)
                if not line.strip():
                    continue
                try:
                    msg = decode(line)
                except ProtocolError:
                    continue
                try:
                    handle = self._dispatch(msg, handle, transport)
                except (AutoranError, DeploymentRejected):
                    # Validation errors were already answered with an ERROR
                    # message; the peer decides whether to go on.
                    continue

    def _dispatch(self, msg, handle, transport):
        if msg.type == "REGISTER":
            name = msg.payload.get("xapp", f"xapp-{len(self.sim.handles) + 1}")
            return self.sim.register_external(name, responder=None, transport=transport)
        if handle is None:
            return None
        if msg.type == "SUBSCRIPTION_REQ":
            self.sim.subscribe(
                handle,
                msg.payload.get("metrics", []),
                msg.payload.get("granularity", "per_cell"),
                int(msg.payload.get("period_ms", 0)),
            )
        elif msg.type == "RIC_CONTROL":
            self.sim.apply_control(
                handle,
                msg.payload.get("action", ""),
                msg.payload.get("params", {}),
                msg.payload.get("correlation"),
            )
        return handle

    def run(self) -> ScenarioResult:
        """Wait for peers, stream the scenario, drain, close."""
        deadline = time.monotonic() + self.wait_s
        while True:
            subscribed = sum(1 for h in self.sim.handles.values() if h.subscriptions)
            if subscribed >= self.min_xapps:
                break
            if time.monotonic() >= deadline:
                raise AutoranError(
                    f"no subscribed xApp within {self.wait_s}s (have {subscribed})"
                )
            time.sleep(0.01)
        result = self.sim.run_scenario(pace_s=self.scenario.tick_ms / 1000.0 if self.realtime else 0.0)
        time.sleep(DRAIN_S)
        result.latency_records = list(self.sim.latency_records)
        result.flag_events = list(self.sim.flag_events)
        self.close()
        return result

    def close(self) -> None:
        self._stop.set()
        for conn in self._conns:
            try:
                conn.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            try:
                conn.close()
            except OSError:
                pass
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass


def serve_scenario(
    scenario_path: Path | str,
    host: str = "127.0.0.1",
    port: int = 0,
    realtime: bool = False,
    min_xapps: int = 1,
    wait_s: float = 15.0,
    announce=None,
) -> dict:
    """Blocking helper for the CLI: serve one scenario, return the scores."""
    from .scoring import score_scenario

    scenario = Scenario.load(scenario_path)
    server = SocketSimServer(
        scenario, host=host, port=port, realtime=realtime, min_xapps=min_xapps, wait_s=wait_s
    )
    host, bound_port = server.start()
    if announce:
        announce(host, bound_port)
    result = server.run()
    scores = score_scenario(result, scenario)
    scores["indications"] = result.indications
    return scores
