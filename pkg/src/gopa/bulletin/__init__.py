"""Public bulletin board, randomness beacon and run auditor."""

from gopa.bulletin.beacon import (BeaconError, BeaconState, ChallengeStream, OrderViolation, Participant,
                                  RevealMismatch, beacon_round, reduce_mod, seed_commitment)
from gopa.bulletin.board import (COORDINATOR, Board, BoardCorrupted, BoardError, BulletinEntry, Draft, EntryKind,
                                 RejectedEntry, SequenceConflict, encode_payload, enrollment_draft, make_draft)
from gopa.bulletin.verify import RunConfig, Verdict, verify_run

__all__ = [
    "BeaconError", "BeaconState", "ChallengeStream", "OrderViolation", "Participant", "RevealMismatch",
    "beacon_round", "reduce_mod", "seed_commitment",
    "COORDINATOR", "Board", "BoardCorrupted", "BoardError", "BulletinEntry", "Draft", "EntryKind",
    "RejectedEntry", "SequenceConflict", "encode_payload", "enrollment_draft", "make_draft",
    "RunConfig", "Verdict", "verify_run",
]
