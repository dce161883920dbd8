"""WiPIN: person identification from Wi-Fi channel state information."""
