"""Test suite for installment agreement extraction pipeline."""

