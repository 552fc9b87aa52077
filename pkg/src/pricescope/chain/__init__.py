from .address import (
    DEAD_ADDRESS,
    NULL_ADDRESSES,
    ZERO_ADDRESS,
    AccountKind,
    Address,
    account_kind,
    is_null,
)
from .invocations import (
    BalanceDelta,
    UserInvocation,
    compute_balance_deltas,
    net_deltas,
    slice_user_invocations,
)
from .rpc import fetch_trace
from .tokens import Token, TokenRegistry, format_amount
from .trace import CallFrame, LogRecord, TransactionTrace, load_trace, save_trace, trace_from_dict, trace_to_dict
from .transfers import TRANSFER_TOPIC, TransferAction, TransferKind, decode_transfers
