# Source alphabets
