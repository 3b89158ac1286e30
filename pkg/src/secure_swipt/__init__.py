"""AN-aided secure beamforming for multi-user MIMO SWIPT."""
