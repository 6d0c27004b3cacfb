"""Polynomial and Taylor model module"""
