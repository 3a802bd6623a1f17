"""Minimal RFC 6455 WebSocket layer over asyncio streams.

Covers exactly what the operator console needs: the HTTP upgrade
handshake, unfragmented text frames, ping/pong, and clean close. Server
frames go unmasked, client frames masked, per the RFC. No extensions,
no subprotocols, no fragmentation.
"""

from __future__ import annotations

import asyncio
import base64
import hashlib
import os
import struct
from typing import Callable, Optional
from urllib.parse import urlparse

from .errors import SwarmStageError

_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_TEXT = 0x1
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA


class WsError(SwarmStageError):
    pass


def _accept_key(key: str) -> str:
    digest = hashlib.sha1((key + _GUID).encode()).digest()
    return base64.b64encode(digest).decode()


def _encode_frame(opcode: int, payload: bytes, mask: bool) -> bytes:
    head = bytes([0x80 | opcode])
    n = len(payload)
    mask_bit = 0x80 if mask else 0
    if n < 126:
        head += bytes([mask_bit | n])
    elif n < 65536:
        head += bytes([mask_bit | 126]) + struct.pack(">H", n)
    else:
        head += bytes([mask_bit | 127]) + struct.pack(">Q", n)
    if mask:
        key = os.urandom(4)
        masked = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
        return head + key + masked
    return head + payload


class WebSocket:
    """One open connection; symmetric for server and client ends."""

    def __init__(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter,
                 is_client: bool):
        self._reader = reader
        self._writer = writer
        self._is_client = is_client
        self._closed = False

    @property
    def closed(self) -> bool:
        return self._closed

    async def _read_frame(self) -> tuple[int, bytes]:
        b1b2 = await self._reader.readexactly(2)
        opcode = b1b2[0] & 0x0F
        if not b1b2[0] & 0x80:
            raise WsError("fragmented frames not supported")
        masked = bool(b1b2[1] & 0x80)
        n = b1b2[1] & 0x7F
        if n == 126:
            n = struct.unpack(">H", await self._reader.readexactly(2))[0]
        elif n == 127:
            n = struct.unpack(">Q", await self._reader.readexactly(8))[0]
        key = await self._reader.readexactly(4) if masked else None
        payload = await self._reader.readexactly(n) if n else b""
        if key:
            payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
        return opcode, payload

    async def send_text(self, text: str) -> None:
        if self._closed:
            raise WsError("send on closed websocket")
        self._writer.write(_encode_frame(OP_TEXT, text.encode(), self._is_client))
        await self._writer.drain()

    async def recv_text(self) -> Optional[str]:
        """Next text message, or None once the peer closes."""
        while True:
            if self._closed:
                return None
            try:
                opcode, payload = await self._read_frame()
            except (asyncio.IncompleteReadError, ConnectionError):
                self._closed = True
                return None
            if opcode == OP_TEXT:
                return payload.decode()
            if opcode == OP_PING:
                self._writer.write(_encode_frame(OP_PONG, payload, self._is_client))
                await self._writer.drain()
            elif opcode == OP_CLOSE:
                await self.close()
                return None
            # pongs and anything else are ignored

    async def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        try:
            self._writer.write(_encode_frame(OP_CLOSE, b"", self._is_client))
            await self._writer.drain()
        except ConnectionError:
            pass
        self._writer.close()
        try:
            await self._writer.wait_closed()
        except (ConnectionError, asyncio.CancelledError):
            pass


async def _handshake_server(reader, writer) -> Optional[WebSocket]:
    request = await reader.readuntil(b"\r\n\r\n")
    lines = request.decode("latin-1").split("\r\n")
    headers = {}
    for line in lines[1:]:
        if ":" in line:
            k, v = line.split(":", 1)
            headers[k.strip().lower()] = v.strip()
    key = headers.get("sec-websocket-key")
    if headers.get("upgrade", "").lower() != "websocket" or not key:
        writer.write(b"HTTP/1.1 400 Bad Request\r\n\r\n")
        await writer.drain()
        writer.close()
        return None
    resp = (
        "HTTP/1.1 101 Switching Protocols\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Accept: {_accept_key(key)}\r\n\r\n"
    )
    writer.write(resp.encode())
    await writer.drain()
    return WebSocket(reader, writer, is_client=False)


async def serve(handler: Callable, host: str, port: int) -> asyncio.AbstractServer:
    """Start a WebSocket server; ``handler(ws)`` runs per connection."""

    async def on_connect(reader, writer):
        try:
            ws = await _handshake_server(reader, writer)
        except (asyncio.IncompleteReadError, ConnectionError):
            writer.close()
            return
        if ws is None:
            return
        try:
            await handler(ws)
        finally:
            await ws.close()

    return await asyncio.start_server(on_connect, host, port)


async def connect(url: str) -> WebSocket:
    """Open a client connection to ws://host:port/path."""
    parsed = urlparse(url)
    if parsed.scheme != "ws":
        raise WsError(f"unsupported scheme {parsed.scheme!r}")
    host = parsed.hostname or "127.0.0.1"
    port = parsed.port or 80
    reader, writer = await asyncio.open_connection(host, port)
    key = base64.b64encode(os.urandom(16)).decode()
    req = (
        f"GET {parsed.path or '/'} HTTP/1.1\r\n"
        f"Host: {host}:{port}\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Key: {key}\r\n"
        "Sec-WebSocket-Version: 13\r\n\r\n"
    )
    writer.write(req.encode())
    await writer.drain()
    status = await reader.readuntil(b"\r\n\r\n")
    lines = status.decode("latin-1").split("\r\n")
    if "101" not in lines[0]:
        writer.close()
        raise WsError(f"handshake rejected: {lines[0]}")
    headers = {}
    for line in lines[1:]:
        if ":" in line:
            k, v = line.split(":", 1)
            headers[k.strip().lower()] = v.strip()
    if headers.get("sec-websocket-accept") != _accept_key(key):
        writer.close()
        raise WsError("bad accept key")
    return WebSocket(reader, writer, is_client=True)
