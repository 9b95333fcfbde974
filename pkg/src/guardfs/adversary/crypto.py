"""Keyed stream cipher used by the synthetic encryptors.

The key is derived from the run seed and thrown away after the run; nothing
is ever decrypted.
"""

from __future__ import annotations

import hashlib

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms


class StreamEncryptor:
    def __init__(self, seed: int, label: str = ""):
        key = hashlib.sha256(f"guardfs-key:{seed}:{label}".encode()).digest()
        self._key = key

    def encrypt(self, data: bytes, nonce_material: str) -> bytes:
        nonce = hashlib.sha256(nonce_material.encode()).digest()[:16]
        enc = Cipher(algorithms.ChaCha20(self._key, nonce), mode=None).encryptor()
        return enc.update(data) + enc.finalize()
