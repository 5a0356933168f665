# Reporting utilities
