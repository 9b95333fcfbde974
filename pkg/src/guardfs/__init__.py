"""GuardFS: an overlay file system that detects crypto-ransomware from
file-system call telemetry and deploys deceptive or terminating defenses."""

__version__ = "0.1.0"
