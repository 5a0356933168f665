# Sub-Nyquist photonic blind source separation simulator
