from .node import DemuteResult, Delivery, Muted, Node, NodeConfig, NodeStopped, NotLeader, Transmit
from .wire import DataField, Hello, Kind, Subtype, WireError, decode_data, encode_data

__all__ = [
    "DataField", "Delivery", "DemuteResult", "Hello", "Kind", "Muted", "Node", "NodeConfig",
    "NodeStopped", "NotLeader", "Subtype", "Transmit", "WireError", "decode_data", "encode_data",
]
