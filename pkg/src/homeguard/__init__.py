"""Software-only smart home security gateway.

Simulated sensor fleet, an alerting controller, a flow-based network
intrusion detector, two-factor authentication and an HTTP remote-access
API, wired together behind one CLI.
"""

__version__ = "0.1.0"
