# Tests for mcbdqm
