"""Out-of-process denoisers over a binary stdin/stdout protocol.

A request frame is, in little-endian order::

    magic "PNPD" | version u32 = 1 | height u32 | width u32 |
    epsilon f64 | pixels f64 x (height * width), row-major

and the matching response frame is::

    magic "PNPR" | version u32 = 1 | height u32 | width u32 |
    pixels f64 x (height * width), row-major

The adapter sends one request per call and blocks for the response; any
deviation from the protocol raises :class:`AdapterError` with the captured
stderr of the subprocess.  A reference server (identity and Gaussian-MMSE
handlers) is provided and runnable as ``python -m pnpmap.external``.
"""

from __future__ import annotations

import os
import select
import struct
import subprocess
import sys
import threading
import time

import numpy as np

from .denoisers import Denoiser, GaussianMMSEDenoiser
from .exceptions import AdapterError, ConfigurationError, NumericError, ShapeMismatchError

REQUEST_MAGIC = b"PNPD"
RESPONSE_MAGIC = b"PNPR"
PROTOCOL_VERSION = 1

_REQ_HEADER = struct.Struct("<4sIIId")
_RESP_HEADER = struct.Struct("<4sIII")


def pack_request(x: np.ndarray, epsilon: float) -> bytes:
    x = np.ascontiguousarray(x, dtype="<f8")
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2:
        raise ShapeMismatchError("external denoiser expects a 1-D or 2-D array")
    h, w = x.shape
    header = _REQ_HEADER.pack(REQUEST_MAGIC, PROTOCOL_VERSION, h, w, float(epsilon))
    return header + x.tobytes()


def pack_response(x: np.ndarray) -> bytes:
    x = np.ascontiguousarray(x, dtype="<f8")
    h, w = x.shape
    header = _RESP_HEADER.pack(RESPONSE_MAGIC, PROTOCOL_VERSION, h, w)
    return header + x.tobytes()


def unpack_request(read_exact) -> tuple[np.ndarray, float]:
    """Parse one request frame using ``read_exact(n) -> bytes``."""
    header = read_exact(_REQ_HEADER.size)
    magic, version, h, w, epsilon = _REQ_HEADER.unpack(header)
    if magic != REQUEST_MAGIC:
        raise AdapterError(f"bad request magic {magic!r}")
    if version != PROTOCOL_VERSION:
        raise AdapterError(f"unsupported protocol version {version}")
    body = read_exact(8 * h * w)
    pixels = np.frombuffer(body, dtype="<f8").reshape(h, w).copy()
    return pixels, epsilon


class ExternalDenoiser(Denoiser):
    """Adapter that forwards denoising requests to a subprocess.

    The subprocess is launched lazily on first use and kept alive between
    calls.  Access is serialised with a lock: one request is in flight at a
    time.  Callers wanting parallelism run several adapter instances.
    """

    def __init__(self, command, epsilon: float, timeout: float = 30.0):
        if epsilon <= 0:
            raise ConfigurationError("epsilon must be > 0")
        self.command = list(command)
        self.epsilon = float(epsilon)
        self.timeout = float(timeout)
        self._proc = None
        self._lock = threading.Lock()

    def _ensure_process(self):
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
            )

    def _fail(self, reason: str):
        diagnostics = ""
        if self._proc is not None:
            self._proc.kill()
            try:
                _, err = self._proc.communicate(timeout=5.0)
                code = self._proc.returncode
                diagnostics = f" (exit code {code}, stderr: {err.decode(errors='replace')[-500:].strip()!r})"
            except Exception:
                pass
            self._proc = None
        raise AdapterError(f"external denoiser {self.command!r}: {reason}{diagnostics}")

    def _read_exact(self, n: int, deadline: float) -> bytes:
        fd = self._proc.stdout.fileno()
        chunks = []
        remaining = n
        while remaining > 0:
            budget = deadline - time.monotonic()
            if budget <= 0:
                self._fail(f"timed out after {self.timeout} s waiting for response")
            ready, _, _ = select.select([fd], [], [], budget)
            if not ready:
                continue
            chunk = os.read(fd, remaining)
            if not chunk:
                self._fail("subprocess closed its output mid-frame")
            chunks.append(chunk)
            remaining -= len(chunk)
        return b"".join(chunks)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        request_shape = x.shape
        frame = pack_request(x, self.epsilon)
        h, w = (1, x.size) if x.ndim == 1 else x.shape
        with self._lock:
            self._ensure_process()
            deadline = time.monotonic() + self.timeout
            try:
                self._proc.stdin.write(frame)
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError):
                self._fail("subprocess closed its input")
            header = self._read_exact(_RESP_HEADER.size, deadline)
            magic, version, rh, rw = _RESP_HEADER.unpack(header)
            if magic != RESPONSE_MAGIC:
                self._fail(f"bad response magic {magic!r}")
            if version != PROTOCOL_VERSION:
                self._fail(f"unsupported response version {version}")
            if (rh, rw) != (h, w):
                self._fail(f"response shape {(rh, rw)} does not match request {(h, w)}")
            body = self._read_exact(8 * rh * rw, deadline)
        pixels = np.frombuffer(body, dtype="<f8").reshape(rh, rw)
        if not np.all(np.isfinite(pixels)):
            raise NumericError("external denoiser returned NaN or Inf")
        return pixels.reshape(request_shape).copy()

    def close(self):
        with self._lock:
            if self._proc is not None:
                self._proc.stdin.close()
                self._proc.wait(timeout=5.0)
                self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __del__(self):
        try:
            if self._proc is not None:
                self._proc.kill()
        except Exception:
            pass


def serve(handler, stdin=None, stdout=None) -> None:
    """Answer request frames until EOF.

    ``handler(pixels, epsilon) -> ndarray`` produces the response grid.
    Intended for reference servers and tests; real denoisers only need to
    speak the same frame format.
    """
    stdin = stdin if stdin is not None else sys.stdin.buffer
    stdout = stdout if stdout is not None else sys.stdout.buffer

    def read_exact(n: int) -> bytes:
        chunks = b""
        while len(chunks) < n:
            chunk = stdin.read(n - len(chunks))
            if not chunk:
                raise EOFError
            chunks += chunk
        return chunks

    while True:
        try:
            pixels, epsilon = unpack_request(read_exact)
        except EOFError:
            return
        result = np.asarray(handler(pixels, epsilon), dtype=np.float64)
        stdout.write(pack_response(result))
        stdout.flush()


def main(argv=None) -> int:
    import argparse

    parser = argparse.ArgumentParser(
        description="Reference denoising server speaking the PNPD/PNPR protocol."
    )
    parser.add_argument("--denoiser", choices=["identity", "gaussian-mmse"],
                        default="identity")
    parser.add_argument("--mean", type=float, default=0.0,
                        help="prior mean for gaussian-mmse")
    parser.add_argument("--prior-var", type=float, default=1.0,
                        help="prior variance for gaussian-mmse")
    args = parser.parse_args(argv)

    if args.denoiser == "identity":
        handler = lambda pixels, epsilon: pixels
    else:
        def handler(pixels, epsilon):
            return GaussianMMSEDenoiser(args.mean, args.prior_var, epsilon)(pixels)

    serve(handler)
    return 0


if __name__ == "__main__":
    sys.exit(main())
