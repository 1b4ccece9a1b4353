# This file makes Python treat the 'tests/cli' directory as a package.
