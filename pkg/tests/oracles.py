"""Independent reference implementations the tests compare against."""

import errno
import os
import random


def tree_contents(root) -> dict[str, bytes]:
    out = {}
    for dirpath, dirnames, filenames in os.walk(root):
        rel_dir = os.path.relpath(dirpath, root)
        for d in dirnames:
            out[os.path.normpath(os.path.join(rel_dir, d)) + "/"] = b""
        for f in filenames:
            with open(os.path.join(dirpath, f), "rb") as fh:
                out[os.path.normpath(os.path.join(rel_dir, f))] = fh.read()
    return out


def brute_force_loss(before: dict[str, bytes], after: dict[str, bytes]) -> int:
    """Bytes of baseline files whose exact content survives nowhere afterwards."""
    remaining = [v for k, v in after.items() if not k.endswith("/")]
    lost = 0
    for k, v in before.items():
        if k.endswith("/"):
            continue
        if not any(v == w for w in remaining):
            lost += len(v)
    return lost


def mutate(root, rng, n) -> list[str]:
    """Apply `n` random bit flips, deletions, renames and creations under
    `root`; returns the kinds applied."""
    applied = []
    while len(applied) < n:
        files = sorted(p for p in root.rglob("*") if p.is_file())
        r = rng.random()
        if r < 0.8 and not files:
            continue
        if r < 0.3:
            f = rng.choice(files)
            b = bytearray(f.read_bytes())
            if not b:
                continue
            b[rng.randrange(len(b))] ^= 1 << rng.randrange(8)
            f.write_bytes(bytes(b))
            applied.append("flip")
        elif r < 0.55:
            rng.choice(files).unlink()
            applied.append("delete")
        elif r < 0.8:
            f = rng.choice(files)
            f.rename(f.with_name(f.name + ".moved"))
            applied.append("rename")
        else:
            (root / f"new{len(applied)}").write_bytes(rng.randbytes(rng.randrange(1, 3000)))
            applied.append("create")
    return applied


# -- randomized operation sequences ------------------------------------------

NAMES = ["a", "b", "c", "d", "e"]


def random_ops(rng: random.Random, n: int) -> list[tuple]:
    """A mix of namespace and data calls over a small name space, so that
    plenty of them collide (missing files, existing targets)."""
    ops = []
    for _ in range(n):
        d = rng.choice(["", "x/", "y/"])
        p = "/" + d + rng.choice(NAMES)
        r = rng.random()
        if r < 0.22:
            ops.append(("write", p, rng.randrange(0, 3000), rng.randbytes(rng.randrange(0, 5000))))
        elif r < 0.40:
            ops.append(("read", p, rng.randrange(0, 6000), rng.randrange(1, 5000)))
        elif r < 0.50:
            ops.append(("create", p))
        elif r < 0.60:
            q = "/" + rng.choice(["", "x/", "y/"]) + rng.choice(NAMES)
            ops.append(("rename", p, q))
        elif r < 0.70:
            ops.append(("unlink", p))
        elif r < 0.78:
            ops.append(("readdir", "/" + d.rstrip("/")))
        elif r < 0.84:
            ops.append(("mkdir", "/" + rng.choice(["x", "y", "x/z"])))
        elif r < 0.88:
            ops.append(("rmdir", "/" + rng.choice(["x", "y", "x/z"])))
        elif r < 0.94:
            ops.append(("truncate", p, rng.randrange(0, 4000)))
        else:
            ops.append(("stat", p))
    return ops


def _err(exc: OSError) -> tuple:
    return ("err", exc.errno or errno.EIO)


def run_bare(ops, root) -> list[tuple]:
    """Execute with plain os calls on a directory; one response per op."""
    log = []

    def full(p):
        return os.path.join(root, p.lstrip("/"))

    for op in ops:
        try:
            kind = op[0]
            if kind == "write":
                fd = os.open(full(op[1]), os.O_WRONLY | os.O_CREAT, 0o644)
                try:
                    log.append(("ok", os.pwrite(fd, op[3], op[2])))
                finally:
                    os.close(fd)
            elif kind == "read":
                fd = os.open(full(op[1]), os.O_RDONLY)
                try:
                    log.append(("ok", os.pread(fd, op[3], op[2])))
                finally:
                    os.close(fd)
            elif kind == "create":
                fd = os.open(full(op[1]), os.O_WRONLY | os.O_CREAT, 0o644)
                os.close(fd)
                log.append(("ok",))
            elif kind == "rename":
                os.rename(full(op[1]), full(op[2]))
                log.append(("ok",))
            elif kind == "unlink":
                os.unlink(full(op[1]))
                log.append(("ok",))
            elif kind == "readdir":
                log.append(("ok", sorted(os.listdir(full(op[1])))))
            elif kind == "mkdir":
                os.mkdir(full(op[1]), 0o755)
                log.append(("ok",))
            elif kind == "rmdir":
                os.rmdir(full(op[1]))
                log.append(("ok",))
            elif kind == "truncate":
                os.truncate(full(op[1]), op[2])
                log.append(("ok",))
            elif kind == "stat":
                st = os.lstat(full(op[1]))
                log.append(("ok", st.st_size, st.st_mode))
        except OSError as exc:
            log.append(_err(exc))
    return log


def run_scripted(ops, proc) -> list[tuple]:
    """The same sequence through a ScriptedProcess on a mount session."""
    log = []

    def check(resp):
        if resp.error:
            raise OSError(resp.error, os.strerror(resp.error))
        return resp

    for op in ops:
        try:
            kind = op[0]
            if kind == "write":
                fh = check(proc.open(op[1], os.O_WRONLY)).fh if _exists(proc, op[1]) else \
                    check(proc.create(op[1], os.O_WRONLY)).fh
                try:
                    log.append(("ok", check(proc.write(fh, op[3], op[2])).count))
                finally:
                    proc.release(fh)
            elif kind == "read":
                fh = check(proc.open(op[1], os.O_RDONLY)).fh
                try:
                    log.append(("ok", check(proc.read(fh, op[3], op[2])).data))
                finally:
                    proc.release(fh)
            elif kind == "create":
                fh = check(proc.create(op[1], os.O_WRONLY)).fh
                proc.release(fh)
                log.append(("ok",))
            elif kind == "rename":
                check(proc.rename(op[1], op[2]))
                log.append(("ok",))
            elif kind == "unlink":
                check(proc.unlink(op[1]))
                log.append(("ok",))
            elif kind == "readdir":
                log.append(("ok", sorted(check(proc.listdir(op[1] or "/")).entries)))
            elif kind == "mkdir":
                check(proc.mkdir(op[1], 0o755))
                log.append(("ok",))
            elif kind == "rmdir":
                check(proc.rmdir(op[1]))
                log.append(("ok",))
            elif kind == "truncate":
                check(proc.truncate(op[1], op[2]))
                log.append(("ok",))
            elif kind == "stat":
                a = check(proc.stat(op[1])).attr
                log.append(("ok", a.size, a.mode))
        except OSError as exc:
            log.append(_err(exc))
    return log


def _exists(proc, path) -> bool:
    return proc.stat(path).error == 0
