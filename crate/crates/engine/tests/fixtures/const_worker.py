# Worker double: a body ending in `return <number>` scores that number on every instance.
import json
import sys

inp = sys.stdin.buffer
out = sys.stdout.buffer


def read_frame():
    digits = b""
    while True:
        c = inp.read(1)
        if not c:
            return None
        if c == b" ":
            break
        digits += c
    body = inp.read(int(digits))
    inp.read(1)
    return json.loads(body)


def write(msg):
    body = json.dumps(msg).encode()
    out.write(str(len(body)).encode() + b" " + body + b"\n")
    out.flush()


while True:
    req = read_frame()
    if req is None:
        break
    if req.get("type") == "ping":
        write({"type": "pong", "version": "const-1"})
        continue
    n = len(req["payload"]["instances"])
    try:
        value = float(req["source"].split()[-1])
        write({"type": "result", "id": req["id"], "ok": True, "scores": [value] * n, "stderr_excerpt": ""})
    except ValueError as e:
        write({"type": "result", "id": req["id"], "ok": False, "error_kind": "exception",
               "stderr_excerpt": str(e)})
