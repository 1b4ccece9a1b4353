# This file makes Python treat the 'tests/core' directory as a package.
