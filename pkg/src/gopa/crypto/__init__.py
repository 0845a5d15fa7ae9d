from gopa.crypto.groups import (
    BACKENDS,
    ConfigurationError,
    Group,
    OpCounter,
    SchnorrGroup,
    Secp256k1Group,
    get_group,
    smallest_backend,
)
from gopa.crypto.hashing import Drbg, hash_parts, hash_to_int
from gopa.crypto.pedersen import (
    Commitment,
    GroupParams,
    combine,
    commit,
    from_zq,
    negated_pair_commit,
    open_ok,
    setup_from_beacon,
    to_zq,
)
from gopa.crypto.signatures import KeyPair, keygen, sign, verify_signature

__all__ = [
    "BACKENDS", "ConfigurationError", "Group", "OpCounter", "SchnorrGroup", "Secp256k1Group",
    "get_group", "smallest_backend", "Drbg", "hash_parts", "hash_to_int", "Commitment",
    "GroupParams", "combine", "commit", "from_zq", "negated_pair_commit", "open_ok",
    "setup_from_beacon", "to_zq", "KeyPair", "keygen", "sign", "verify_signature",
]
