"""Multi-process backend over TCP.

Each worker process hosts the places striped onto it (place ``i`` lives on
host ``i % H``). Place-to-place traffic uses the binary frames from
``transport`` on one connection per ordered place pair; a coordinator drives
the phases over a separate control connection per worker.

Control messages are pickled and therefore only suitable for a trusted
cluster network.
"""
import logging
import pickle
import socket
import struct
import subprocess
import sys
import threading
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from . import errors
from .errors import TransportError, TripressError
from .host import OutputSpec, PlaceHost, PlaceOutput
from .storage import dict_name, find_file
from .transport import (IdGroupMsg, TermGroupMsg, decode_frame, encode_frame, payload_size, recv_frame,
                        send_frame)

log = logging.getLogger(__name__)

_HELLO = struct.Struct("<II")


def parse_host(text: str) -> Tuple[str, int]:
    host, sep, port = text.strip().rpartition(":")
    if not sep or not host:
        raise errors.ConfigError(f"host entry {text!r} is not host:port")
    try:
        return host, int(port)
    except ValueError:
        raise errors.ConfigError(f"host entry {text!r} has a bad port") from None


def read_hosts_file(path) -> List[Tuple[str, int]]:
    lines = Path(path).read_text().splitlines()
    hosts = [parse_host(line) for line in lines if line.strip() and not line.lstrip().startswith("#")]
    if not hosts:
        raise errors.ConfigError(f"{path}: no hosts listed")
    return hosts


def _send_obj(sock, obj):
    send_frame(sock, pickle.dumps(obj, protocol=pickle.HIGHEST_PROTOCOL))


def _recv_obj(sock):
    return pickle.loads(recv_frame(sock))


# -- worker side ----------------------------------------------------------


class _Session:
    def __init__(self, ctrl: socket.socket, bind_host: str):
        self.ctrl = ctrl
        self.bind_host = bind_host
        self.host: Optional[PlaceHost] = None
        self.place_count = 0
        self.conns: Dict[Tuple[int, int], socket.socket] = {}
        self.conn_locks: Dict[Tuple[int, int], threading.Lock] = {}
        self.listener: Optional[socket.socket] = None
        self.readers: List[threading.Thread] = []
        self.incoming: List[socket.socket] = []
        self.closing = False

    def setup(self, params):
        from .orchestrator import make_states

        self.place_count = params["place_count"]
        local = params["places"]
        states = make_states(local, self.place_count, params.get("seed_dir"))
        outputs = {}
        spec: Optional[OutputSpec] = params.get("output")
        if spec is not None:
            spec.directory.mkdir(parents=True, exist_ok=True)
            for p in local:
                seed = find_file(spec.seed_dir, dict_name(p)) if spec.seed_dir is not None else None
                outputs[p] = PlaceOutput(spec, p, self.place_count, seed)
        self.host = PlaceHost({s.place_index: s for s in states}, outputs, threads=params.get("threads", True),
                              remote=self.send_remote)
        self.listener = socket.create_server((self.bind_host, 0))
        threading.Thread(target=self._accept_loop, daemon=True).start()
        return self.listener.getsockname()[1]

    def _accept_loop(self):
        while True:
            try:
                conn, _ = self.listener.accept()
            except OSError:
                return
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            self.incoming.append(conn)
            t = threading.Thread(target=self._read_loop, args=(conn,), daemon=True)
            t.start()
            self.readers.append(t)

    def _read_loop(self, conn):
        try:
            hello = bytes(recv_frame(conn))
            origin, dest = _HELLO.unpack(hello)
            while True:
                frame = recv_frame(conn)
                msg = decode_frame(frame)
                if msg.origin != origin or msg.dest != dest:
                    raise errors.ProtocolError(f"frame {msg.origin}->{msg.dest} on connection {origin}->{dest}")
                if isinstance(msg, TermGroupMsg):
                    self.host.deliver_terms(msg, payload_size(frame))
                else:
                    self.host.deliver_ids(msg)
        except EOFError:
            if not self.closing:
                self.host.fail(TransportError("peer closed a data connection mid-run"))
        except Exception as exc:  # surfaced to the waiting phase
            if not self.closing:
                self.host.fail(exc)

    def connect(self, addresses: Dict[int, Tuple[str, int]]):
        for origin in self.host.places:
            for dest, addr in sorted(addresses.items()):
                if dest in self.host.states:
                    continue
                try:
                    s = socket.create_connection(addr, timeout=30)
                except OSError as exc:
                    raise TransportError(f"place {origin} cannot reach place {dest} at {addr}: {exc}") from exc
                s.settimeout(None)
                s.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                send_frame(s, _HELLO.pack(origin, dest))
                self.conns[(origin, dest)] = s
                self.conn_locks[(origin, dest)] = threading.Lock()

    def send_remote(self, msg):
        key = (msg.origin, msg.dest)
        conn = self.conns.get(key)
        if conn is None:
            raise TransportError(f"no connection for place pair {key}")
        frame = encode_frame(msg)
        with self.conn_locks[key]:
            send_frame(conn, frame)

    def finish(self):
        files = self.host.finish()
        return {
            "files": {p: [str(f) for f in fs] for p, fs in files.items()},
            "metrics": {p: self.host.states[p].metrics.to_dict() for p in self.host.places},
            "dict_sizes": {p: len(self.host.states[p].dictionary) for p in self.host.places},
            "events": [(e.loop, e.phase, e.place, e.start, e.end) for e in self.host.events],
        }

    def close(self):
        self.closing = True
        for s in list(self.conns.values()) + self.incoming:
            try:
                s.close()
            except OSError:
                pass
        if self.listener is not None:
            self.listener.close()
        if self.host is not None:
            self.host.shutdown()

    def serve(self):
        try:
            while True:
                try:
                    cmd = _recv_obj(self.ctrl)
                except EOFError:
                    return
                kind = cmd[0]
                try:
                    if kind == "setup":
                        result = self.setup(cmd[1])
                    elif kind == "connect":
                        result = self.connect(cmd[1])
                    elif kind == "phase":
                        result = self.host.run_phase(cmd[1], cmd[2], cmd[3])
                    elif kind == "finish":
                        result = self.finish()
                    elif kind == "close":
                        _send_obj(self.ctrl, ("ok", None))
                        return
                    else:
                        raise errors.ProtocolError(f"unknown control command {kind!r}")
                except Exception as exc:
                    log.exception("worker command %s failed", kind)
                    _send_obj(self.ctrl, ("error", type(exc).__name__, str(exc)))
                    self.closing = True
                    return
                _send_obj(self.ctrl, ("ok", result))
        finally:
            self.close()


def serve(bind: str = "127.0.0.1:0", once: bool = False, announce=None):
    """Run a worker until killed (or after one session with ``once``)."""
    host, port = parse_host(bind)
    server = socket.create_server((host, port))
    actual = server.getsockname()[1]
    if announce is not None:
        announce(f"{host}:{actual}")
    try:
        while True:
            ctrl, _ = server.accept()
            ctrl.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            with ctrl:
                _Session(ctrl, host).serve()
            if once:
                return
    finally:
        server.close()


def spawn_local_workers(n: int, once=True):
    """Start ``n`` loopback worker processes; returns ``(hosts, processes)``."""
    procs, hosts = [], []
    for _ in range(n):
        args = [sys.executable, "-m", "tripress.cli", "worker", "--bind", "127.0.0.1:0"]
        if once:
            args.append("--once")
        proc = subprocess.Popen(args, stdout=subprocess.PIPE, text=True)
        line = proc.stdout.readline().strip()
        if not line:
            proc.kill()
            raise TransportError("local worker failed to start")
        procs.append(proc)
        hosts.append(parse_host(line.split()[-1]))
    return hosts, procs


# -- coordinator side -----------------------------------------------------


class TcpCluster:
    backend = "tcp"

    def __init__(self, hosts: List[Tuple[str, int]], place_count: int, output: Optional[OutputSpec],
                 seed_dir=None, threads=True):
        self.place_count = place_count
        self.hosts = hosts
        self.assignment: Dict[int, List[int]] = {h: [] for h in range(len(hosts))}
        for p in range(place_count):
            self.assignment[p % len(hosts)].append(p)
        self.ctrls: Dict[int, socket.socket] = {}
        self._metrics = {}
        self._dict_sizes = {}
        self.events = []
        try:
            for h, addr in enumerate(hosts):
                if not self.assignment[h]:
                    continue
                try:
                    s = socket.create_connection(addr, timeout=30)
                except OSError as exc:
                    raise TransportError(f"cannot reach worker {addr[0]}:{addr[1]}: {exc}") from exc
                s.settimeout(None)
                s.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
                self.ctrls[h] = s
            data_ports = self._broadcast(lambda h: ("setup", {
                "place_count": place_count, "places": self.assignment[h], "output": output,
                "seed_dir": seed_dir, "threads": threads}))
            addresses = {}
            for h, port in data_ports.items():
                for p in self.assignment[h]:
                    addresses[p] = (hosts[h][0], port)
            self._broadcast(lambda h: ("connect", addresses))
        except BaseException:
            self.close()
            raise

    def _broadcast(self, make_cmd):
        for h, s in self.ctrls.items():
            _send_obj(s, make_cmd(h))
        results, failure = {}, None
        for h, s in self.ctrls.items():
            try:
                reply = _recv_obj(s)
            except (EOFError, TripressError) as exc:
                failure = failure or TransportError(f"worker {self.hosts[h]} dropped the control connection: {exc}")
                continue
            if reply[0] == "ok":
                results[h] = reply[1]
            elif failure is None:
                cls = getattr(errors, reply[1], None)
                if not (isinstance(cls, type) and issubclass(cls, TripressError)):
                    cls = TransportError
                failure = cls(f"worker {self.hosts[h][0]}:{self.hosts[h][1]}: {reply[2]}")
        if failure is not None:
            raise failure
        return results

    def run_phase(self, name, loop, payload=None):
        payload = payload or {}
        self._broadcast(lambda h: ("phase", name, loop,
                                   {p: payload[p] for p in self.assignment[h] if p in payload}))

    def finish(self):
        results = self._broadcast(lambda h: ("finish",))
        files = {}
        for res in results.values():
            files.update(res["files"])
            self._metrics.update(res["metrics"])
            self._dict_sizes.update(res["dict_sizes"])
            self.events.extend(res["events"])
        return [Path(f) for p in sorted(files) for f in files[p]]

    def metrics(self):
        from .metrics import MetricCounters
        return [MetricCounters.from_dict(self._metrics[p]) for p in range(self.place_count)]

    def dictionary_sizes(self):
        return [self._dict_sizes[p] for p in range(self.place_count)]

    def close(self):
        for s in self.ctrls.values():
            try:
                _send_obj(s, ("close",))
                _recv_obj(s)
            except (OSError, EOFError, TripressError):
                pass
            s.close()
        self.ctrls = {}
