# Core signal, sampling, estimation and separation components
