#!/usr/bin/env python3
"""Scriptable stand-in for an external navigator.

Speaks the newline-delimited JSON protocol on stdin/stdout (or a TCP socket
with --tcp PORT). Behaviour is selected with --behavior:
  finish      always answer {"action": "finished"}
  first       move to the first navigable viewpoint, finish when none
  invalid     name a viewpoint that is never presented
  garbage     emit a non-JSON line
  hang        never answer (for timeout tests)
"""

import argparse
import json
import re
import socket
import sys

VIEWPOINT_RE = re.compile(r"Navigable: ([^ ]+) \(")


def answer(line: str, behavior: str) -> str | None:
    request = json.loads(line)
    prompt = request.get("prompt", "")
    if behavior == "finish":
        return json.dumps({"action": "finished", "thought": "stopping"})
    if behavior == "first":
        found = VIEWPOINT_RE.search(prompt)
        action = found.group(1) if found else "finished"
        return json.dumps({"action": action, "thought": "moving"})
    if behavior == "invalid":
        return json.dumps({"action": "vp_does_not_exist", "thought": ""})
    if behavior == "garbage":
        return "this is not json"
    if behavior == "hang":
        return None
    raise SystemExit(f"unknown behavior {behavior}")


def serve_stdio(behavior: str) -> None:
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        reply = answer(line, behavior)
        if reply is None:
            import time

            time.sleep(3600)
        sys.stdout.write(reply + "\n")
        sys.stdout.flush()


def serve_tcp(behavior: str, port: int) -> None:
    server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    server.bind(("127.0.0.1", port))
    server.listen(1)
    sys.stdout.write(f"listening {server.getsockname()[1]}\n")
    sys.stdout.flush()
    conn, _ = server.accept()
    buf = b""
    while True:
        chunk = conn.recv(4096)
        if not chunk:
            break
        buf += chunk
        while b"\n" in buf:
            line, buf = buf.split(b"\n", 1)
            reply = answer(line.decode(), behavior)
            if reply is None:
                continue
            conn.sendall(reply.encode() + b"\n")
    conn.close()


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--behavior", default="first")
    parser.add_argument("--tcp", type=int, default=None)
    args = parser.parse_args()
    if args.tcp is not None:
        serve_tcp(args.behavior, args.tcp)
    else:
        serve_stdio(args.behavior)


if __name__ == "__main__":
    main()
