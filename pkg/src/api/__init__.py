# Pipeline and sweep orchestration
